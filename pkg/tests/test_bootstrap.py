import numpy as np
import pytest

import lpinfer.bootstrap as bs
from lpinfer.ar import ArSpec, ar_estimate
from lpinfer.bootstrap import (
    BootstrapSpec,
    arla_efron,
    arla_efron_path,
    lp_pairs_bootstrap,
    lp_percentile_t,
    lp_percentile_t_path,
    percentile_t_interval,
    pope_bias_correct,
)
from lpinfer.exceptions import TooManyFailedDraws
from lpinfer.lp import LpSpec, lp_estimate
from lpinfer.numeric import derive_stream
from lpinfer.var import VAR4_COVARIANCE, InnovationSpec, VarCoefficients, bivariate_var4_dgp, simulate


@pytest.fixture(scope="module")
def var4_sample():
    return simulate(bivariate_var4_dgp(0.95), InnovationSpec.gaussian(VAR4_COVARIANCE), 240, rng=21)


def test_spec_validation():
    with pytest.raises(ValueError):
        BootstrapSpec(draws=49)
    with pytest.raises(ValueError):
        BootstrapSpec(kind="block")
    with pytest.raises(ValueError):
        BootstrapSpec(interval="bca")
    with pytest.raises(ValueError):
        BootstrapSpec(multiplier="mammen")
    BootstrapSpec(kind="pairs", interval="efron")


def test_illegal_combinations_rejected(var4_sample):
    lp = LpSpec(1, 1, (1, 0), control_lags=4)
    with pytest.raises(ValueError):
        lp_percentile_t(var4_sample, lp, BootstrapSpec(100, interval="efron"))
    with pytest.raises(ValueError):
        lp_percentile_t(var4_sample, lp, BootstrapSpec(100, kind="pairs"))
    ar = ArSpec(1, 1, (1, 0), lags=4, lag_augmented=True)
    with pytest.raises(ValueError):
        arla_efron(var4_sample, ar, BootstrapSpec(100))
    with pytest.raises(ValueError):
        arla_efron(var4_sample, ArSpec(1, 1, (1, 0), lags=4), BootstrapSpec(100, interval="efron"))
    with pytest.raises(ValueError):
        lp_pairs_bootstrap(var4_sample, lp, BootstrapSpec(100))


# --- bias correction ------------------------------------------------------


def test_pope_ar1_closed_form():
    for rho, T in [(0.9, 100), (0.3, 240), (-0.5, 50)]:
        c = pope_bias_correct(VarCoefficients([rho]), [[1.0]], T)
        assert c.lag_blocks[0, 0, 0] == pytest.approx(rho + (1 + 3 * rho) / T, abs=1e-12)


def test_pope_ar2_matches_known_bias():
    # first-order bias of OLS AR(2) with an estimated mean:
    # E phi1_hat - phi1 = -(1 + phi1 + phi2) / T, E phi2_hat - phi2 = -(2 + 4 phi2) / T
    for f1, f2 in [(0.5, 0.2), (1.1, -0.3), (0.2, 0.6)]:
        c = pope_bias_correct(VarCoefficients([f1, f2]), [[2.0]], 1000)
        np.testing.assert_allclose(c.lag_blocks.ravel() - [f1, f2], [(1 + f1 + f2) / 1000, (2 + 4 * f2) / 1000], atol=1e-12)


def test_pope_white_noise_large_sample():
    s = simulate(VarCoefficients([0.0]), None, 100_000, rng=1)
    fit = bs.fit_var(s, 1)
    c = pope_bias_correct(fit.coeffs, fit.sigma, fit.effective_sample)
    assert abs(c.lag_blocks[0, 0, 0] - fit.coeffs.lag_blocks[0, 0, 0]) < 1e-3


def test_pope_reduces_ar1_bias():
    g = np.random.default_rng(5)
    R, T, rho = 10_000, 100, 0.9
    e = g.standard_normal((R, T))
    y = np.zeros((R, T))
    for t in range(1, T):
        y[:, t] = rho * y[:, t - 1] + e[:, t]
    x, z = y[:, :-1], y[:, 1:]
    xc = x - x.mean(axis=1, keepdims=True)
    zc = z - z.mean(axis=1, keepdims=True)
    rho_hat = np.sum(xc * zc, axis=1) / np.sum(xc * xc, axis=1)
    resid = zc - rho_hat[:, None] * xc
    s2 = np.mean(resid**2, axis=1)
    corrected = np.array([pope_bias_correct(VarCoefficients([r]), [[v]], T - 1).lag_blocks[0, 0, 0] for r, v in zip(rho_hat, s2)])
    assert abs(corrected.mean() - rho) < abs(rho_hat.mean() - rho)


def test_pope_passes_unit_root_through():
    c = VarCoefficients([1.0])
    out, info = pope_bias_correct(c, [[1.0]], 100, return_info=True)
    assert out is c
    assert info.nonstationary and not info.applied


def test_pope_shrinks_to_stay_stationary():
    out, info = pope_bias_correct(VarCoefficients([0.99]), [[1.0]], 20, return_info=True)
    assert info.applied and 0 < info.shrinkage < 1
    assert out.spectral_radius() < 1
    # the next 0.01 step would have crossed the unit circle
    assert 0.99 + (info.shrinkage + 0.01) * 3.97 / 20 >= 1


# --- wild recursive percentile-t ------------------------------------------


def test_percentile_t_symmetric_quantiles_give_delta_form():
    q = 1.7
    t = np.tile([-q, q], 100)
    lo, hi = percentile_t_interval(2.0, 0.5, t, 0.9)
    assert (lo, hi) == pytest.approx((2.0 - 0.5 * q, 2.0 + 0.5 * q))


def test_lp_percentile_t_is_deterministic(var4_sample):
    spec = LpSpec(6, 1, (1, 0), control_lags=4)
    a = lp_percentile_t(var4_sample, spec, BootstrapSpec(100), 0.9, derive_stream(3, 0, 1))
    b = lp_percentile_t(var4_sample, spec, BootstrapSpec(100), 0.9, derive_stream(3, 0, 1))
    assert a.interval == b.interval
    c = lp_percentile_t(var4_sample, spec, BootstrapSpec(100), 0.9, derive_stream(3, 0, 2))
    assert a.interval != c.interval
    est, _ = lp_estimate(var4_sample, spec)
    assert a.point == est.point and a.se == est.se
    assert a.method == "LP-LA_b"


def test_path_matches_single_horizon(var4_sample):
    spec = LpSpec(1, 1, (1, 0), control_lags=4)
    reps = lp_percentile_t_path(var4_sample, spec, [1, 6], BootstrapSpec(80), 0.9, 4)
    one = lp_percentile_t(var4_sample, spec, BootstrapSpec(80), 0.9, 4)
    assert reps[0].interval == one.interval


def test_centering_shift_is_exact(var4_sample):
    spec = LpSpec(6, 1, (1, 0), control_lags=4)
    rep = lp_percentile_t(var4_sample, spec, BootstrapSpec(200), 0.9, 9)
    d = rep.draws
    alt = (d.point_stats - rep.point) / d.se_stats
    np.testing.assert_allclose(alt - d.t_stats, (d.center - rep.point) / d.se_stats, atol=1e-12)
    lo, hi = percentile_t_interval(rep.point, rep.se, d.t_stats, 0.9)
    assert (lo, hi) == (rep.lo, rep.hi)


def test_multipliers_and_initial_blocks(var4_sample):
    spec = LpSpec(1, 1, (1, 0), control_lags=4)
    rep = lp_percentile_t(var4_sample, spec, BootstrapSpec(300), 0.9, 10)
    U = rep.draws.multipliers
    assert abs(U.mean()) < 4 / np.sqrt(U.size)
    data = var4_sample.data
    windows = np.lib.stride_tricks.sliding_window_view(data, (4, 2))[:, 0]
    for block in rep.draws.initial_blocks:
        assert np.any(np.all(windows == block, axis=(1, 2)))


def test_rademacher_multipliers(var4_sample):
    spec = LpSpec(1, 1, (1, 0), control_lags=4)
    rep = lp_percentile_t(var4_sample, spec, BootstrapSpec(60, multiplier="rademacher"), 0.9, 10)
    assert set(np.unique(rep.draws.multipliers)) == {-1.0, 1.0}


def test_batched_lp_matches_direct_estimates(var4_sample):
    g = np.random.default_rng(0)
    Y = var4_sample.data[None] + 0.1 * g.standard_normal((3, 240, 2))
    nu = np.array([1.0, 0.0])
    for la in (True, False):
        spec = LpSpec(6, 1, nu, la, 4)
        pt, se, ok = bs._lp_on_paths(Y, spec, nu)
        assert ok.all()
        for b in range(3):
            rep, _ = lp_estimate(Y[b], spec)
            assert pt[b] == pytest.approx(rep.point, abs=1e-10)
            assert se[b] == pytest.approx(rep.se, rel=1e-9)


def test_failed_draws_dropped_and_counted(var4_sample, monkeypatch):
    real = bs.recurse_batch
    spec = LpSpec(1, 1, (1, 0), control_lags=4)

    def failing(share):
        def fake(coeffs, Y, U):
            failed = real(coeffs, Y, U)
            failed[: int(share * len(failed))] = True
            return failed

        return fake

    monkeypatch.setattr(bs, "recurse_batch", failing(0.05))
    rep = lp_percentile_t(var4_sample, spec, BootstrapSpec(100), 0.9, 1)
    assert rep.draws.failed == 5 and rep.draws.t_stats.size == 95
    assert "failed-draws=5" in rep.diagnostics
    monkeypatch.setattr(bs, "recurse_batch", failing(0.2))
    with pytest.raises(TooManyFailedDraws):
        lp_percentile_t(var4_sample, spec, BootstrapSpec(100), 0.9, 1)
    assert lp_percentile_t_path(var4_sample, spec, [1], BootstrapSpec(100), 0.9, 1, strict=False) == [None]


# --- lag-augmented AR Efron ------------------------------------------------


def test_arla_stub_gives_zero_width_interval(var4_sample, stub):
    row = np.random.default_rng(2).standard_normal(240)
    spec = ArSpec(6, 1, (1, 0), lags=4, lag_augmented=True)
    rep = arla_efron(var4_sample, spec, BootstrapSpec(60, interval="efron"), 0.9, stub(normal_row=row, integers_value=3))
    assert rep.lo == rep.hi == rep.draws.point_stats[0]
    assert np.all(rep.draws.point_stats == rep.draws.point_stats[0])


def test_batched_var_responses_match_ar_estimate(var4_sample):
    g = np.random.default_rng(1)
    Y = var4_sample.data[None] + 0.1 * g.standard_normal((2, 240, 2))
    resp, ok = bs._batched_var_responses(Y, 5, 4, 1, np.array([1.0, 0.0]), [1, 6, 12])
    assert ok.all()
    for b in range(2):
        for k, h in enumerate([1, 6, 12]):
            direct = ar_estimate(Y[b], ArSpec(h, 1, (1, 0), lags=4, lag_augmented=True)).point
            assert resp[k, b] == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_arla_efron_interval_is_quantile_range(var4_sample):
    spec = ArSpec(6, 1, (1, 0), lags=4, lag_augmented=True)
    rep = arla_efron(var4_sample, spec, BootstrapSpec(200, interval="efron"), 0.9, 3)
    q = np.quantile(rep.draws.point_stats, [0.05, 0.95])
    assert rep.interval == pytest.approx(tuple(q))
    assert rep.method == "AR-LA_b"
    path = arla_efron_path(var4_sample, spec, [6, 12], BootstrapSpec(200, interval="efron"), 0.9, 3)
    assert path[0].interval == rep.interval


# --- pairs ------------------------------------------------------------------


def test_pairs_identity_resample_reproduces_sample_statistic(var4_sample, stub):
    spec = LpSpec(6, 1, (1, 0), control_lags=4)
    est, _ = lp_estimate(var4_sample, spec)
    for interval in ("efron", "percentile-t"):
        rep = lp_pairs_bootstrap(var4_sample, spec, BootstrapSpec(50, kind="pairs", interval=interval), 0.9, stub(index_rows=True))
        np.testing.assert_allclose(rep.draws.point_stats, est.point, rtol=1e-12)
        np.testing.assert_allclose(rep.draws.se_stats, est.se, rtol=1e-9)


def test_pairs_intervals(var4_sample):
    spec = LpSpec(6, 1, (1, 0), control_lags=4)
    a = lp_pairs_bootstrap(var4_sample, spec, BootstrapSpec(200, kind="pairs", interval="efron"), 0.9, 2)
    b = lp_pairs_bootstrap(var4_sample, spec, BootstrapSpec(200, kind="pairs"), 0.9, 2)
    assert a.lo < a.point < a.hi and b.lo < b.point < b.hi
    assert a.method == b.method == "LP-LA_pairs"


# --- Monte Carlo properties (slow) -----------------------------------------


def _coverage(fn, R):
    return np.mean([fn(r) for r in range(R)])


@pytest.mark.slow
def test_unit_root_percentile_t_coverage():
    c = VarCoefficients([1.0])

    def one(r):
        s = simulate(c, None, 240, rng=derive_stream(101, r, 0))
        rep = lp_percentile_t(s, LpSpec(12), BootstrapSpec(500), 0.9, derive_stream(101, r, 1))
        return rep.covers(1.0)

    cov = _coverage(one, 1000)
    print(f"AR(1) rho=1 h=12 LP-LA_b coverage {cov:.3f}")
    assert 0.85 <= cov <= 0.93


@pytest.mark.slow
def test_pairs_coverage_stationary():
    c = VarCoefficients([0.5])

    def one(r):
        s = simulate(c, None, 2000, rng=derive_stream(102, r, 0))
        rep = lp_pairs_bootstrap(s, LpSpec(1), BootstrapSpec(200, kind="pairs"), 0.9, derive_stream(102, r, 1))
        return rep.covers(0.5)

    cov = _coverage(one, 1000)
    print(f"AR(1) rho=0.5 h=1 pairs coverage {cov:.3f}")
    assert cov == pytest.approx(0.90, abs=0.03)


@pytest.mark.slow
def test_pairs_not_better_than_wild_in_small_samples():
    c = VarCoefficients([0.95])
    hs = [1, 6, 12]
    hits_w, hits_p = np.zeros(3), np.zeros(3)
    R = 1000
    for r in range(R):
        s = simulate(c, None, 240, rng=derive_stream(103, r, 0))
        wild = lp_percentile_t_path(s, LpSpec(1), hs, BootstrapSpec(200), 0.9, derive_stream(103, r, 1))
        for k, h in enumerate(hs):
            hits_w[k] += wild[k].covers(0.95**h)
            pr = lp_pairs_bootstrap(s, LpSpec(h), BootstrapSpec(200, kind="pairs"), 0.9, derive_stream(103, r, 2 + k))
            hits_p[k] += pr.covers(0.95**h)
    print("wild", hits_w / R, "pairs", hits_p / R)
    assert np.all(hits_p / R <= hits_w / R + 0.02)

"""Bootstrap intervals for local projections and lag-augmented AR.

The wild recursive bootstrap regenerates data from a bias-corrected VAR(p)
fitted to the sample, with residuals multiplied by i.i.d. scalar draws and
initial conditions copied from a random block of the observed series. Every
bootstrap statistic is computed for all draws at once: the per-draw
regressions are stacked into ``(B, N, k)`` arrays and solved by batched QR.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from .ar import ArSpec, fit_var
from .exceptions import InsufficientSample, TooManyFailedDraws
from .lp import EstimateReport, LpSpec, _check_sample, ewc_dof, ewc_long_run_variance, lp_estimate
from .numeric import as_generator, batched_ols
from .var import VarCoefficients, as_data, companion, impulse_responses, recurse_batch

KINDS = ("wild-recursive", "pairs")
INTERVALS = ("percentile-t", "efron")
MULTIPLIERS = ("normal", "rademacher")
MAX_FAILED_SHARE = 0.10
_CHUNK = 512


@dataclass(frozen=True)
class BootstrapSpec:
    """Bootstrap configuration.

    ``multiplier`` is the law of the wild weights ``U_t``; the standard
    normal is the default and Rademacher signs are offered for experiments.
    """

    draws: int = 2000
    kind: str = "wild-recursive"
    interval: str = "percentile-t"
    bias_correct: bool = True
    multiplier: str = "normal"

    def __post_init__(self):
        if self.draws < 50:
            raise ValueError(f"need at least 50 bootstrap draws, got {self.draws}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.interval not in INTERVALS:
            raise ValueError(f"interval must be one of {INTERVALS}")
        if self.multiplier not in MULTIPLIERS:
            raise ValueError(f"multiplier must be one of {MULTIPLIERS}")


@dataclass(frozen=True)
class BootstrapDraws:
    """Surviving bootstrap statistics for one horizon.

    ``t_stats`` is empty for Efron-type bootstraps. ``multipliers`` and
    ``initial_blocks`` are kept for wild recursive draws only.
    """

    t_stats: np.ndarray
    point_stats: np.ndarray
    center: float
    failed: int
    se_stats: np.ndarray | None = None
    multipliers: np.ndarray | None = None
    initial_blocks: np.ndarray | None = None


@dataclass(frozen=True)
class PopeInfo:
    applied: bool
    shrinkage: float
    nonstationary: bool
    radius_before: float
    radius_after: float


# ---------------------------------------------------------------------------
# Bias correction


def pope_bias_correct(fit: VarCoefficients, residual_cov, T: int, return_info: bool = False):
    """First-order analytic bias correction of VAR slope coefficients.

    The bias of the companion matrix ``A`` is approximated by
    ``-(1/T) S [(I - A')^-1 + A'(I - A'^2)^-1 + sum_k l_k (I - l_k A')^-1] G0^-1``
    where ``l_k`` are the eigenvalues of ``A``, ``S`` is the companion
    innovation covariance and ``G0`` the stationary covariance of the state.
    The correction is scaled down in steps of 0.01 until the corrected
    companion matrix is stable. A fit that is already on or outside the unit
    circle is returned untouched with ``nonstationary`` set in the info.

    Returns the corrected coefficients, or ``(coeffs, PopeInfo)`` when
    ``return_info`` is true. The intercept is passed through unchanged.
    """
    n, p = fit.n, fit.p
    A = companion(fit)
    eig = np.linalg.eigvals(A)
    radius = float(np.max(np.abs(eig)))
    if radius >= 1.0:
        info = PopeInfo(False, 0.0, True, radius, radius)
        return (fit, info) if return_info else fit
    m = n * p
    S = np.zeros((m, m))
    S[:n, :n] = np.asarray(residual_cov, dtype=float).reshape(n, n)
    G0 = linalg.solve_discrete_lyapunov(A, S)
    I = np.eye(m)
    At = A.T
    M = np.linalg.inv(I - At) + At @ np.linalg.inv(I - At @ At)
    for lam in eig:
        M = M + lam * np.linalg.inv(I - lam * At)
    bias_T = np.real(S @ M @ np.linalg.inv(G0))  # T * (E A_hat - A), up to sign
    step = bias_T[:n] / T
    delta = 1.0
    while True:
        top = fit.matrix + delta * step
        corrected = VarCoefficients.from_matrix(top, n, fit.intercept)
        after = corrected.spectral_radius()
        if after < 1.0 or delta <= 0.0:
            break
        delta = round(delta - 0.01, 10)
    if delta <= 0.0:
        corrected, after = fit, radius
    info = PopeInfo(delta > 0.0, delta, False, radius, after)
    return (corrected, info) if return_info else corrected


def _bootstrap_dgp(data: np.ndarray, p: int, bias_correct: bool):
    """Fit the VAR(p) that generates bootstrap samples; return (coeffs, residuals)."""
    fit = fit_var(data, p)
    coeffs = fit.coeffs
    if bias_correct:
        coeffs, info = pope_bias_correct(coeffs, fit.sigma, fit.effective_sample, return_info=True)
        if info.applied:
            # re-fit the intercept so the bootstrap mean matches the sample mean
            Z = fit.regressors[:, 1:]
            c = data[p:].mean(axis=0) - coeffs.matrix @ Z.mean(axis=0)
            coeffs = VarCoefficients(coeffs.lag_blocks, c)
    return coeffs, fit.residuals


def _wild_paths(data, coeffs: VarCoefficients, resid, B: int, gen, multiplier: str):
    """Draw ``B`` wild recursive paths of the same length as ``data``."""
    T, n = data.shape
    p = coeffs.p
    N = resid.shape[0]
    if multiplier == "normal":
        U = gen.standard_normal((B, N))
    else:
        U = gen.integers(0, 2, size=(B, N)) * 2.0 - 1.0
    starts = np.asarray(gen.integers(0, T - p + 1, size=B))
    Y = np.zeros((B, T, n))
    Y[:, :p] = data[starts[:, None] + np.arange(p)]
    failed = recurse_batch(coeffs, Y, U[:, :, None] * resid[None])
    Y[failed] = 0.0
    return Y, failed, U, Y[:, :p].copy()


def _check_failures(failed: int, B: int, strict: bool = True) -> bool:
    """True when the failure share is acceptable; raise or return False otherwise."""
    if failed > MAX_FAILED_SHARE * B:
        if strict:
            raise TooManyFailedDraws(f"{failed} of {B} bootstrap draws failed")
        return False
    return True


# ---------------------------------------------------------------------------
# Batched local projections


def _lp_design_batch(Y, h: int, L: int, i: int, intercept: bool):
    B, T, n = Y.shape
    N = T - h - L
    first = L
    cols = [np.ones((B, N, 1))] if intercept else []
    cols.append(Y[:, first : first + N])
    cols += [Y[:, first - l : first - l + N] for l in range(1, L + 1)]
    return np.concatenate(cols, axis=2), Y[:, first + h : first + h + N, i]


def _lp_stats(W, target, k0: int, n: int, nu, se_kind: str):
    """Point estimates and standard errors of ``nu' beta`` for stacked regressions.

    The influence weights of ``nu' beta_hat`` are ``nu' R^-1 Q'`` restricted
    to the rows of ``beta``; by the Frisch-Waugh theorem they equal
    ``nu' (sum u u')^-1 u_t`` with ``u_t`` the residualised regressors.
    """
    coef, xi, R_inv, Q, ok = batched_ols(target, W)
    point = coef[:, k0 : k0 + n] @ nu
    w = np.einsum("j,bjk,bnk->bn", nu, R_inv[:, k0 : k0 + n, :], Q)
    N = W.shape[1]
    if se_kind == "ehw":
        se = np.sqrt(np.sum((w * xi) ** 2, axis=1))
    elif se_kind == "homoskedastic":
        se = np.sqrt(np.mean(xi**2, axis=1) * np.sum(w**2, axis=1))
    else:
        omega = ewc_long_run_variance(N * w * xi, ewc_dof(N))
        se = np.sqrt(omega / N)
    ok = ok & np.isfinite(point) & np.isfinite(se) & (se > 0)
    return point, se, ok


def _lp_on_paths(Y, spec: LpSpec, nu):
    n = Y.shape[2]
    W, target = _lp_design_batch(Y, spec.horizon, spec.lags_in_regression, spec.response_variable, spec.intercept)
    return _lp_stats(W, target, int(spec.intercept), n, nu, spec.se)


def percentile_t_interval(point: float, se: float, t_stats, level: float) -> tuple[float, float]:
    """``[point - se Q(1 - a/2), point - se Q(a/2)]`` from bootstrap t-statistics."""
    a = 1.0 - level
    q_lo, q_hi = np.quantile(np.asarray(t_stats, dtype=float), [a / 2, 1 - a / 2], method="linear")
    return point - se * q_hi, point - se * q_lo


def efron_interval(point_stats, level: float) -> tuple[float, float]:
    a = 1.0 - level
    lo, hi = np.quantile(np.asarray(point_stats, dtype=float), [a / 2, 1 - a / 2], method="linear")
    return float(lo), float(hi)


def _check_wild(boot: BootstrapSpec, interval: str) -> None:
    if boot.kind != "wild-recursive":
        raise ValueError(f"this routine needs a wild-recursive bootstrap, got {boot.kind!r}")
    if boot.interval != interval:
        raise ValueError(f"this routine builds {interval} intervals, got {boot.interval!r}")


def lp_percentile_t_path(
    sample, lp_spec: LpSpec, horizons, boot_spec: BootstrapSpec, level: float = 0.90, rng=None, strict: bool = True
):
    """Wild recursive percentile-t intervals at several horizons.

    One set of bootstrap paths is shared by all horizons. Returns a list of
    :class:`EstimateReport`, each carrying its :class:`BootstrapDraws` in
    ``draws``.

    Raises
    ------
    TooManyFailedDraws
        If more than 10% of the draws fail at any horizon. With
        ``strict=False`` that horizon's entry is ``None`` instead.
    """
    _check_wild(boot_spec, "percentile-t")
    data = as_data(sample)
    T, n = data.shape
    p = lp_spec.control_lags
    horizons = [int(h) for h in horizons]
    for h in horizons:
        _check_sample(T, n, h, p)
    nu = lp_spec.weights(n)
    i = lp_spec.response_variable
    gen = as_generator(rng)

    sample_reports = [lp_estimate(data, lp_spec.at(h), level)[0] for h in horizons]
    dgp, resid = _bootstrap_dgp(data, p, boot_spec.bias_correct)
    irf = impulse_responses(dgp, max(horizons))
    centers = [irf.response(i, nu, h) for h in horizons]

    B = boot_spec.draws
    pts = np.empty((len(horizons), B))
    ses = np.empty((len(horizons), B))
    good = np.empty((len(horizons), B), dtype=bool)
    U_all = np.empty((B, resid.shape[0]))
    blocks = np.empty((B, p, n))
    for lo in range(0, B, _CHUNK):
        hi = min(lo + _CHUNK, B)
        Y, failed, U, init = _wild_paths(data, dgp, resid, hi - lo, gen, boot_spec.multiplier)
        U_all[lo:hi], blocks[lo:hi] = U, init
        for k, h in enumerate(horizons):
            pt, se, ok = _lp_on_paths(Y, lp_spec.at(h), nu)
            pts[k, lo:hi], ses[k, lo:hi], good[k, lo:hi] = pt, se, ok & ~failed

    reports = []
    for k, h in enumerate(horizons):
        g = good[k]
        nfail = int(B - g.sum())
        if not _check_failures(nfail, B, strict):
            reports.append(None)
            continue
        t = (pts[k, g] - centers[k]) / ses[k, g]
        rep = sample_reports[k]
        lo_, hi_ = percentile_t_interval(rep.point, rep.se, t, level)
        draws = BootstrapDraws(t, pts[k, g], centers[k], nfail, ses[k, g], U_all, blocks)
        tag = ("LP-LA" if lp_spec.lag_augmented else "LP") + "_b"
        diag = (f"failed-draws={nfail}",) if nfail else ()
        reports.append(replace(rep, lo=lo_, hi=hi_, method=tag, dof=None, diagnostics=diag, draws=draws))
    return reports


def lp_percentile_t(sample, lp_spec: LpSpec, boot_spec: BootstrapSpec, level: float = 0.90, rng=None) -> EstimateReport:
    """Wild recursive percentile-t interval for a local projection.

    Bootstrap t-statistics are centred at the response implied by the
    bias-corrected VAR(p) that generates the bootstrap data, which is the
    true parameter of the bootstrap world.
    """
    return lp_percentile_t_path(sample, lp_spec, [lp_spec.horizon], boot_spec, level, rng)[0]


# ---------------------------------------------------------------------------
# Lag-augmented AR with Efron intervals


def _batched_var_responses(Y, fit_lags: int, keep_lags: int, i: int, nu, horizons):
    """Fit VAR(fit_lags) on every path and return responses at ``horizons``."""
    B, T, n = Y.shape
    N = T - fit_lags
    cols = [np.ones((B, N, 1))] + [Y[:, fit_lags - l : T - l] for l in range(1, fit_lags + 1)]
    Z = np.concatenate(cols, axis=2)
    coef, _, _, _, ok = batched_ols(Y[:, fit_lags:], Z)
    # blocks[b, l, r, c] = coefficient of y_{t-l-1, c} in equation r
    blocks = coef[:, 1 : 1 + n * keep_lags, :].reshape(B, keep_lags, n, n).transpose(0, 1, 3, 2)
    state = np.zeros((B, keep_lags, n))
    state[:, 0] = nu
    out = np.empty((len(horizons), B))
    want = {h: k for k, h in enumerate(horizons)}
    with np.errstate(over="ignore", invalid="ignore"):
        for h in range(1, max(horizons) + 1):
            top = np.einsum("blrc,blc->br", blocks, state)
            state = np.concatenate([top[:, None], state[:, :-1]], axis=1)
            if h in want:
                out[want[h]] = state[:, 0, i]
    return out, ok


def arla_efron_path(
    sample, ar_spec: ArSpec, horizons, boot_spec: BootstrapSpec, level: float = 0.90, rng=None, strict: bool = True
):
    """Efron intervals for the lag-augmented AR response at several horizons."""
    _check_wild(boot_spec, "efron")
    if not ar_spec.lag_augmented:
        raise ValueError("arla_efron needs a lag-augmented ArSpec")
    from .ar import ar_estimate

    data = as_data(sample)
    T, n = data.shape
    p = ar_spec.lags
    horizons = [int(h) for h in horizons]
    for h in horizons:
        _check_sample(T, n, h, p)
    nu = ar_spec.weights(n)
    i = ar_spec.response_variable
    gen = as_generator(rng)

    sample_reports = [ar_estimate(data, ar_spec.at(h), level) for h in horizons]
    # bootstrap samples come from the augmented VAR(p+1) fit, so draws centre
    # at the lag-augmented estimate rather than at the VAR(p) response
    dgp, resid = _bootstrap_dgp(data, p + 1, boot_spec.bias_correct)
    irf = impulse_responses(VarCoefficients(dgp.lag_blocks[:p]), max(horizons))
    centers = [irf.response(i, nu, h) for h in horizons]

    B = boot_spec.draws
    pts = np.empty((len(horizons), B))
    good = np.empty((len(horizons), B), dtype=bool)
    for lo in range(0, B, _CHUNK):
        hi = min(lo + _CHUNK, B)
        Y, failed, _, _ = _wild_paths(data, dgp, resid, hi - lo, gen, boot_spec.multiplier)
        resp, ok = _batched_var_responses(Y, p + 1, p, i, nu, horizons)
        pts[:, lo:hi] = resp
        good[:, lo:hi] = ok & ~failed & np.isfinite(resp)

    reports = []
    for k, h in enumerate(horizons):
        g = good[k]
        nfail = int(B - g.sum())
        if not _check_failures(nfail, B, strict):
            reports.append(None)
            continue
        lo_, hi_ = efron_interval(pts[k, g], level)
        draws = BootstrapDraws(np.empty(0), pts[k, g], centers[k], nfail)
        diag = sample_reports[k].diagnostics + ((f"failed-draws={nfail}",) if nfail else ())
        reports.append(replace(sample_reports[k], lo=lo_, hi=hi_, method="AR-LA_b", diagnostics=diag, draws=draws))
    return reports


def arla_efron(sample, ar_spec: ArSpec, boot_spec: BootstrapSpec, level: float = 0.90, rng=None) -> EstimateReport:
    """Efron interval for the lag-augmented AR impulse response."""
    return arla_efron_path(sample, ar_spec, [ar_spec.horizon], boot_spec, level, rng)[0]


# ---------------------------------------------------------------------------
# Pairs bootstrap


def lp_pairs_bootstrap(sample, lp_spec: LpSpec, boot_spec: BootstrapSpec, level: float = 0.90, rng=None) -> EstimateReport:
    """Fixed-design pairs bootstrap: rows of the projection resampled i.i.d.

    Percentile-t draws are centred at the sample estimate, which is the
    pseudo-true value of the resampling distribution.
    """
    if boot_spec.kind != "pairs":
        raise ValueError(f"lp_pairs_bootstrap needs kind='pairs', got {boot_spec.kind!r}")
    data = as_data(sample)
    T, n = data.shape
    h = lp_spec.horizon
    _check_sample(T, n, h, lp_spec.control_lags)
    nu = lp_spec.weights(n)
    gen = as_generator(rng)
    rep, _ = lp_estimate(data, lp_spec, level)

    W, target = _lp_design_batch(data[None], h, lp_spec.lags_in_regression, lp_spec.response_variable, lp_spec.intercept)
    W, target = W[0], target[0]
    N = W.shape[0]
    if N < W.shape[1] + 1:
        raise InsufficientSample("too few rows to resample")
    k0 = int(lp_spec.intercept)
    B = boot_spec.draws
    pts, ses, good = np.empty(B), np.empty(B), np.empty(B, dtype=bool)
    for lo in range(0, B, _CHUNK):
        hi = min(lo + _CHUNK, B)
        idx = np.asarray(gen.integers(0, N, size=(hi - lo, N)))
        pts[lo:hi], ses[lo:hi], good[lo:hi] = _lp_stats(W[idx], target[idx], k0, n, nu, lp_spec.se)
    nfail = int(B - good.sum())
    _check_failures(nfail, B)
    diag = (f"failed-draws={nfail}",) if nfail else ()
    if boot_spec.interval == "efron":
        lo_, hi_ = efron_interval(pts[good], level)
        draws = BootstrapDraws(np.empty(0), pts[good], rep.point, nfail, ses[good])
    else:
        t = (pts[good] - rep.point) / ses[good]
        lo_, hi_ = percentile_t_interval(rep.point, rep.se, t, level)
        draws = BootstrapDraws(t, pts[good], rep.point, nfail, ses[good])
    tag = ("LP-LA" if lp_spec.lag_augmented else "LP") + "_pairs"
    return replace(rep, lo=lo_, hi=hi_, method=tag, dof=None, diagnostics=diag, draws=draws)

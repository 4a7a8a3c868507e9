"""Local projection estimators and their standard errors.

The lag-augmented local projection of variable ``i`` at horizon ``h`` is the
regression

    y_{i,t+h} = c + beta' y_t + gamma_1' y_{t-1} + ... + gamma_p' y_{t-p} + xi_t

over ``t = p+1, ..., T-h``. The non-augmented variant drops the ``y_{t-p}``
block. The reported parameter is ``nu' beta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .exceptions import InsufficientSample, SingularSigma
from .numeric import RANK_TOL, ols
from .var import VarCoefficients, as_data

SE_KINDS = ("ehw", "homoskedastic", "ewc-har")


@dataclass(frozen=True)
class LpSpec:
    """What to estimate.

    ``control_lags`` is the VAR lag order ``p``. Lag-augmented projections
    control for ``p`` lags of every variable, non-augmented ones for ``p - 1``.
    ``se_kind=None`` picks EHW when lag-augmented and EWC-HAR otherwise.
    """

    horizon: int
    response_variable: int = 0
    response_weights: tuple | np.ndarray | None = None
    lag_augmented: bool = True
    control_lags: int = 1
    intercept: bool = True
    se_kind: str | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.control_lags < 1:
            raise ValueError("control_lags must be >= 1")
        if self.se_kind is not None and self.se_kind not in SE_KINDS:
            raise ValueError(f"se_kind must be one of {SE_KINDS}")
        if self.response_weights is not None:
            nu = np.asarray(self.response_weights, dtype=float).ravel()
            if not np.any(nu):
                raise ValueError("response_weights must be non-zero")
            object.__setattr__(self, "response_weights", tuple(nu))

    @property
    def se(self) -> str:
        if self.se_kind is not None:
            return self.se_kind
        return "ehw" if self.lag_augmented else "ewc-har"

    @property
    def lags_in_regression(self) -> int:
        return self.control_lags if self.lag_augmented else self.control_lags - 1

    def weights(self, n: int) -> np.ndarray:
        if self.response_weights is None:
            nu = np.zeros(n)
            nu[0] = 1.0
            return nu
        nu = np.asarray(self.response_weights, dtype=float)
        if nu.size != n:
            raise ValueError(f"response_weights has length {nu.size}, data has {n} variables")
        return nu

    def at(self, horizon: int) -> "LpSpec":
        return replace(self, horizon=horizon)


@dataclass(frozen=True)
class EstimateReport:
    point: float
    se: float
    lo: float
    hi: float
    level: float
    effective_sample: int
    method: str
    dof: int | None = None
    diagnostics: tuple = field(default=())
    draws: object = field(default=None, compare=False, repr=False)

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class LpInternals:
    residualized_regressor: np.ndarray  # u_hat_t(h), shape (N, n)
    lp_residuals: np.ndarray  # xi_hat_t(h), shape (N,)
    sigma_hat: np.ndarray
    var_fit: VarCoefficients | None
    coefficients: np.ndarray
    first_row: int


def design(data: np.ndarray, horizon: int, lags: int, intercept: bool = True):
    """Rows of the horizon-``h`` projection with ``lags`` lag controls.

    Returns ``(first, N, current, controls)`` where ``current`` holds
    ``y_t`` and ``controls`` the optional constant followed by
    ``y_{t-1}, ..., y_{t-lags}``, for the 0-based rows ``t = first, ...,
    first + N - 1``.
    """
    T, n = data.shape
    first = lags
    N = T - horizon - lags
    current = data[first : first + N]
    blocks = [np.ones((N, 1))] if intercept else []
    blocks += [data[first - l : first - l + N] for l in range(1, lags + 1)]
    controls = np.concatenate(blocks, axis=1) if blocks else np.empty((N, 0))
    return first, N, current, controls


def _check_sample(T: int, n: int, horizon: int, p: int) -> None:
    if T - horizon - p < n * (p + 1) + 5:
        raise InsufficientSample(
            f"T={T} leaves {T - horizon - p} observations at h={horizon}, need {n * (p + 1) + 5}"
        )


def lp_estimate(sample, spec: LpSpec, level: float = 0.90) -> tuple[EstimateReport, LpInternals]:
    """Local projection point estimate, standard error and delta interval.

    Parameters
    ----------
    sample : SimulatedSample or array_like, shape (T, n)
    spec : LpSpec
    level : float
        Nominal coverage of the symmetric interval.
    """
    data = as_data(sample)
    T, n = data.shape
    h, i = spec.horizon, spec.response_variable
    _check_sample(T, n, h, spec.control_lags)
    nu = spec.weights(n)
    L = spec.lags_in_regression
    first, N, current, controls = design(data, h, L, spec.intercept)
    target = data[first + h : first + h + N, i]

    k0 = 1 if spec.intercept else 0
    W = np.concatenate([controls[:, :k0], current, controls[:, k0:]], axis=1)
    fit = ols(target, W)
    beta = fit.coefficients[k0 : k0 + n]
    xi = fit.residuals

    if controls.shape[1]:
        aux = ols(current, controls)
        u_hat = aux.residuals
        var_fit = None
        if L:
            c = aux.coefficients[0] if spec.intercept else None
            var_fit = VarCoefficients.from_matrix(aux.coefficients[k0:].T, n, c)
    else:
        u_hat, var_fit = current.copy(), None
    sigma = u_hat.T @ u_hat / N
    internals = LpInternals(u_hat, xi, sigma, var_fit, fit.coefficients, first)

    point = float(nu @ beta)
    dof = None
    kind = spec.se
    if kind == "ehw":
        se = ehw_se(internals, nu)
    elif kind == "homoskedastic":
        w = _sigma_solve(sigma, nu)
        se = float(np.sqrt(np.mean(xi**2) * (w @ sigma @ w) / N))
    else:
        w = _sigma_solve(sigma, nu)
        se, dof = ewc_har_se((u_hat @ w) * xi, 1.0, N)
    if dof is None:
        crit = stats.norm.ppf(0.5 + level / 2)
    else:
        crit = stats.t.ppf(0.5 + level / 2, dof)
    tag = ("LP-LA" if spec.lag_augmented else "LP") + f"[{kind}]"
    report = EstimateReport(point, se, point - crit * se, point + crit * se, level, N, tag, dof)
    return report, internals


def _sigma_solve(sigma: np.ndarray, nu: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(sigma, compute_uv=False)
    if s[-1] <= RANK_TOL * s[0]:
        raise SingularSigma("residualized regressors have a singular covariance")
    return np.linalg.solve(sigma, nu)


def ehw_se(internals: LpInternals, nu) -> float:
    """Heteroskedasticity-robust (EHW) standard error of ``nu' beta_hat``.

    ``N^{-1} sqrt(nu' S^{-1} (sum_t xi_t^2 u_t u_t') S^{-1} nu)`` with
    ``S = N^{-1} sum_t u_t u_t'``.
    """
    w = _sigma_solve(internals.sigma_hat, np.asarray(nu, dtype=float))
    z = (internals.residualized_regressor @ w) * internals.lp_residuals
    return float(np.sqrt(z @ z) / len(z))


def ewc_dof(T_eff: int) -> int:
    """Degrees of freedom ``ceil(0.4 T^(2/3))`` of the EWC estimator."""
    return int(np.ceil(0.4 * T_eff ** (2.0 / 3.0)))


def ewc_long_run_variance(scores, dof: int) -> float:
    """Average of ``dof`` squared cosine projections of the scores."""
    z = np.asarray(scores, dtype=float)
    T = z.shape[-1]
    t = np.arange(1, T + 1) - 0.5
    j = np.arange(1, dof + 1)
    basis = np.sqrt(2.0 / T) * np.cos(np.pi * np.outer(t, j) / T)
    lam = z @ basis
    return np.mean(lam**2, axis=-1)


def ewc_har_se(scores, regressor_scale: float, T_eff: int) -> tuple[float, int]:
    """Equally weighted cosine HAR standard error.

    ``se = sqrt(Omega / T_eff) / regressor_scale`` where ``Omega`` is the EWC
    long-run variance of ``scores``; the returned degrees of freedom are the
    ones to use for Student-t critical values.
    """
    dof = ewc_dof(T_eff)
    if dof < 1 or dof > T_eff:
        raise InsufficientSample(f"EWC degrees of freedom {dof} invalid for T_eff={T_eff}")
    omega = float(ewc_long_run_variance(scores, dof))
    return float(np.sqrt(omega / T_eff) / regressor_scale), dof

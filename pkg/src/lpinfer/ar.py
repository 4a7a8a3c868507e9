"""Plug-in VAR impulse-response estimators with delta-method intervals."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .lp import EstimateReport, _check_sample
from .numeric import ols
from .var import VarCoefficients, as_data, companion, impulse_responses

SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class VarFit:
    """OLS fit of a VAR with an intercept, over rows ``lags, ..., T-1``."""

    coeffs: VarCoefficients
    residuals: np.ndarray
    regressors: np.ndarray
    xtx_inv: np.ndarray

    @property
    def effective_sample(self) -> int:
        return self.residuals.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return self.residuals.T @ self.residuals / self.effective_sample


def var_regressors(data: np.ndarray, lags: int, intercept: bool = True) -> np.ndarray:
    T = data.shape[0]
    blocks = [np.ones((T - lags, 1))] if intercept else []
    blocks += [data[lags - l : T - l] for l in range(1, lags + 1)]
    return np.concatenate(blocks, axis=1)


def fit_var(sample, lags: int, intercept: bool = True) -> VarFit:
    data = as_data(sample)
    n = data.shape[1]
    Z = var_regressors(data, lags, intercept)
    fit = ols(data[lags:], Z)
    k0 = 1 if intercept else 0
    c = fit.coefficients[0] if intercept else None
    coeffs = VarCoefficients.from_matrix(fit.coefficients[k0:].T, n, c)
    return VarFit(coeffs, fit.residuals, Z, fit.xtx_inv)


@dataclass(frozen=True)
class ArSpec:
    """Plug-in AR inference on ``nu' beta_i(A, h)``.

    ``lags`` is the VAR order ``p``; with ``lag_augmented`` the VAR is fit
    with ``p + 1`` lags and the extra block is discarded before computing
    responses. ``bias_correct`` applies the Pope correction to the fitted
    coefficients before the response and its Jacobian are evaluated; the
    coefficient covariance is still that of the OLS fit.
    """

    horizon: int
    response_variable: int = 0
    response_weights: tuple | np.ndarray | None = None
    lags: int = 1
    lag_augmented: bool = False
    covariance: str = "ehw"
    bias_correct: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.lags < 1:
            raise ValueError("lags must be >= 1")
        if self.covariance not in ("ehw", "homoskedastic"):
            raise ValueError("covariance must be 'ehw' or 'homoskedastic'")
        if self.response_weights is not None:
            object.__setattr__(self, "response_weights", tuple(np.asarray(self.response_weights, float).ravel()))

    @property
    def lags_estimated(self) -> int:
        return self.lags + int(self.lag_augmented)

    def weights(self, n: int) -> np.ndarray:
        if self.response_weights is None:
            nu = np.zeros(n)
            nu[0] = 1.0
            return nu
        return np.asarray(self.response_weights, dtype=float)

    def at(self, horizon: int) -> "ArSpec":
        return replace(self, horizon=horizon)


@dataclass(frozen=True)
class IrfJacobian:
    """Gradient of ``nu' beta_i(A, h)`` with respect to ``[A_1, ..., A_p]``.

    ``gradient[r * n * p + (l - 1) * n + c]`` is the derivative with respect
    to entry ``(r, c)`` of ``A_l``; ``matrix`` gives the same numbers as an
    ``n x np`` array.
    """

    gradient: np.ndarray
    n: int
    p: int

    @property
    def matrix(self) -> np.ndarray:
        return self.gradient.reshape(self.n, self.n * self.p)


def irf_jacobian(coeffs: VarCoefficients, h: int, nu, i: int) -> IrfJacobian:
    """Analytic derivative of ``e_i' J A^h J' nu`` via the power product rule."""
    if h < 1:
        raise ValueError("h must be >= 1")
    n, p = coeffs.n, coeffs.p
    nu = np.asarray(nu, dtype=float)
    A = companion(coeffs)
    psi_rows = impulse_responses(coeffs, h - 1).responses[:, i, :]  # row i of Psi_j
    b = np.zeros((h, n * p))
    b[0, :n] = nu
    for k in range(1, h):
        b[k] = A @ b[k - 1]
    G = np.einsum("jr,jc->rc", psi_rows, b[::-1])
    return IrfJacobian(G.ravel(), n, p)


def ar_estimate(sample, spec: ArSpec, level: float = 0.90) -> EstimateReport:
    """Plug-in VAR impulse response with a delta-method interval."""
    data = as_data(sample)
    T, n = data.shape
    _check_sample(T, n, spec.horizon, spec.lags)
    nu = spec.weights(n)
    i, h, p = spec.response_variable, spec.horizon, spec.lags
    fit = fit_var(data, spec.lags_estimated)
    coeffs = fit.coeffs
    if spec.bias_correct:
        from .bootstrap import pope_bias_correct

        coeffs = pope_bias_correct(coeffs, fit.sigma, fit.effective_sample)
    coeffs = coeffs.truncated(p)
    point = impulse_responses(coeffs, h).response(i, nu, h)

    G = irf_jacobian(coeffs, h, nu, i).matrix
    k = fit.regressors.shape[1]
    g = np.zeros((k, n))  # gradient laid out like the (k x n) OLS coefficient matrix
    g[1 : 1 + n * p] = G.T
    q = fit.regressors @ (fit.xtx_inv @ g)  # (N, n)
    if spec.covariance == "ehw":
        s = np.sum(q * fit.residuals, axis=1)
        var = float(s @ s)
    else:
        var = float(np.sum((g.T @ fit.xtx_inv @ g) * fit.sigma))
    se = float(np.sqrt(max(var, 0.0)))
    crit = stats.norm.ppf(0.5 + level / 2)
    diagnostics = ("singular-jacobian",) if np.max(np.abs(G)) < SINGULAR_TOL else ()
    tag = "AR-LA" if spec.lag_augmented else "AR"
    return EstimateReport(point, se, point - crit * se, point + crit * se, level, fit.effective_sample, tag, None, diagnostics)

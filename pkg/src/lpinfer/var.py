"""VAR(p) coefficients, companion-form impulse responses and simulation.

Lag blocks are stored as an array of shape ``(p, n, n)`` so that
``lag_blocks[l - 1]`` is the coefficient matrix on ``y_{t-l}``. Simulated
data follows

    y_t = c + A_1 y_{t-1} + ... + A_p y_{t-p} + u_t,   t = 1, ..., T,

with zero pre-sample values unless initial conditions are supplied.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np

from .exceptions import ConfigInvalid, DimensionMismatch, ExplosiveOverflow
from .numeric import as_generator

OVERFLOW_BOUND = 1e100


@dataclass(frozen=True)
class VarCoefficients:
    """Autoregressive coefficients ``A = (A_1, ..., A_p)`` plus optional intercept."""

    lag_blocks: np.ndarray
    intercept: np.ndarray | None = None

    def __post_init__(self):
        blocks = np.array(self.lag_blocks, dtype=float)
        if blocks.ndim == 1:  # univariate AR given as (a_1, ..., a_p)
            blocks = blocks[:, None, None]
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise DimensionMismatch(f"lag blocks must have shape (p, n, n), got {blocks.shape}")
        if blocks.shape[0] < 1:
            raise DimensionMismatch("a VAR needs at least one lag")
        blocks.setflags(write=False)
        object.__setattr__(self, "lag_blocks", blocks)
        if self.intercept is not None:
            c = np.array(self.intercept, dtype=float).reshape(-1)
            if c.shape != (blocks.shape[1],):
                raise DimensionMismatch(f"intercept must have length {blocks.shape[1]}")
            c.setflags(write=False)
            object.__setattr__(self, "intercept", c)

    @property
    def n(self) -> int:
        return self.lag_blocks.shape[1]

    @property
    def p(self) -> int:
        return self.lag_blocks.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """The ``n x np`` matrix ``[A_1, ..., A_p]``."""
        return np.concatenate(list(self.lag_blocks), axis=1)

    @classmethod
    def from_matrix(cls, A, n: int, intercept=None) -> "VarCoefficients":
        A = np.asarray(A, dtype=float)
        p = A.shape[1] // n
        return cls(A.reshape(n, p, n).transpose(1, 0, 2), intercept)

    def intercept_or_zero(self) -> np.ndarray:
        return np.zeros(self.n) if self.intercept is None else self.intercept

    def truncated(self, p: int) -> "VarCoefficients":
        """Keep the first ``p`` lag blocks (drops lag-augmentation blocks)."""
        return VarCoefficients(self.lag_blocks[:p], self.intercept)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(companion(self)))))


def companion(coeffs: VarCoefficients) -> np.ndarray:
    """The ``np x np`` companion matrix with ``[A_1 ... A_p]`` on top."""
    n, p = coeffs.n, coeffs.p
    M = np.zeros((n * p, n * p))
    M[:n, :] = coeffs.matrix
    M[n:, : n * (p - 1)] = np.eye(n * (p - 1))
    return M


@dataclass(frozen=True)
class ImpulseResponseSet:
    """Reduced-form responses ``J A^h J'`` for ``h = 0, ..., H``.

    ``responses[h][i, j]`` is the response of variable ``i`` at horizon ``h``
    to a unit innovation in variable ``j``; row ``i`` is ``beta_i(A, h)'``.
    """

    responses: np.ndarray

    @property
    def max_horizon(self) -> int:
        return self.responses.shape[0] - 1

    def response(self, i: int, nu, h: int) -> float:
        return float(self.responses[h, i] @ np.asarray(nu, dtype=float))


def impulse_responses(coeffs: VarCoefficients, max_horizon: int) -> ImpulseResponseSet:
    if max_horizon < 0:
        raise ValueError("max_horizon must be non-negative")
    n = coeffs.n
    A = companion(coeffs)
    out = np.empty((max_horizon + 1, n, n))
    M = np.zeros((A.shape[0], n))
    M[:n] = np.eye(n)
    out[0] = M[:n]
    for h in range(1, max_horizon + 1):
        M = A @ M
        out[h] = M[:n]
    return ImpulseResponseSet(out)


def bivariate_var4_dgp(rho: float) -> VarCoefficients:
    """Bivariate VAR(4) of the simulation study.

    ``y1_t = rho y1_{t-1} + u1_t`` and ``(1 - L/2)^4 y2_t = y1_{t-1}/2 + u2_t``.
    Pair with :data:`VAR4_COVARIANCE`.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [-1, 1], got {rho}")
    blocks = np.zeros((4, 2, 2))
    blocks[0, 0, 0] = rho
    blocks[0, 1, 0] = 0.5
    # (1 - L/2)^4 = 1 - 2L + 1.5L^2 - 0.5L^3 + 0.0625L^4
    blocks[:, 1, 1] = [2.0, -1.5, 0.5, -0.0625]
    return VarCoefficients(blocks)


VAR4_COVARIANCE = np.array([[1.0, 0.3], [0.3, 1.0]])


# ---------------------------------------------------------------------------
# Factorised parameter space


@dataclass(frozen=True)
class FactorizedDgp:
    """``A(L) = B(L) (I - diag(roots) L)`` with a stable factor ``B(L)``.

    ``stationary_poly`` holds ``B_1, ..., B_{p-1}``; ``None`` means
    ``B(L) = I`` (so ``p = 1``). ``decay`` is the pair ``(C, eps)`` with
    ``||B^l|| <= C (1 - eps)^l`` for the companion matrix ``B`` of ``B(L)``.
    """

    roots: np.ndarray
    stationary_poly: VarCoefficients | None = None
    decay: tuple[float, float] = (1.0, 0.5)

    def __post_init__(self):
        roots = np.atleast_1d(np.array(self.roots, dtype=float))
        object.__setattr__(self, "roots", roots)
        if self.stationary_poly is not None and self.stationary_poly.n != roots.size:
            raise DimensionMismatch("roots and stationary_poly disagree on n")

    @property
    def n(self) -> int:
        return self.roots.size

    @property
    def p(self) -> int:
        return 1 if self.stationary_poly is None else self.stationary_poly.p + 1

    def companion_powers_norms(self, max_power: int = 200) -> np.ndarray:
        """Frobenius norms ``||B^l||`` for ``l = 1, ..., max_power``."""
        if self.stationary_poly is None:
            return np.zeros(max_power)
        Bc = companion(self.stationary_poly)
        out = np.empty(max_power)
        P = np.eye(Bc.shape[0])
        for l in range(max_power):
            P = P @ Bc
            out[l] = np.linalg.norm(P)
        return out

    def satisfies_decay(self, max_power: int = 200) -> bool:
        C, eps = self.decay
        norms = self.companion_powers_norms(max_power)
        bound = C * (1 - eps) ** np.arange(1, max_power + 1)
        return bool(np.all(norms <= bound * (1 + 1e-12)))

    def rho_star(self) -> np.ndarray:
        """``max(|rho_i|, 1 - eps/2)`` for each variable."""
        return np.maximum(np.abs(self.roots), 1 - self.decay[1] / 2)

    def irf_bound_constant(self) -> float:
        C, eps = self.decay
        return 1 + 2 * C * (1 - eps) / eps


def compose_factorized(dgp: FactorizedDgp) -> VarCoefficients:
    """Expand ``B(L) (I - D L)`` into ``I - A_1 L - ... - A_p L^p``."""
    n = dgp.n
    D = np.diag(dgp.roots)
    if dgp.stationary_poly is None:
        return VarCoefficients(D[None])
    Bs = dgp.stationary_poly.lag_blocks
    q = Bs.shape[0]
    A = np.zeros((q + 1, n, n))
    A[0] = Bs[0] + D
    for k in range(1, q):
        A[k] = Bs[k] - Bs[k - 1] @ D
    A[q] = -Bs[q - 1] @ D
    return VarCoefficients(A)


# ---------------------------------------------------------------------------
# Innovations and simulation


@dataclass(frozen=True)
class InnovationSpec:
    """Innovation law: Gaussian i.i.d. or componentwise ARCH(1).

    For ``arch1`` each component of ``v_t`` follows
    ``v_t = tau_t e_t``, ``tau_t^2 = alpha0 + alpha1 v_{t-1}^2`` with
    ``e_t ~ N(0, 1)`` and ``v_0 = 0``; the innovation is ``u_t = L v_t`` for
    the lower-triangular ``loading`` ``L``.
    """

    kind: str = "iid-gaussian"
    covariance: np.ndarray | None = None
    alpha0: float = 0.3
    alpha1: float = 0.7
    loading: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("iid-gaussian", "arch1"):
            raise ConfigInvalid(f"unknown innovation kind {self.kind!r}")
        if self.covariance is not None:
            S = np.atleast_2d(np.array(self.covariance, dtype=float))
            if not np.allclose(S, S.T):
                raise ConfigInvalid("innovation covariance must be symmetric")
            try:
                np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                raise ConfigInvalid("innovation covariance must be positive definite") from None
            object.__setattr__(self, "covariance", S)
        if self.loading is not None:
            object.__setattr__(self, "loading", np.atleast_2d(np.array(self.loading, dtype=float)))
        if self.kind == "arch1" and not (self.alpha0 > 0 and 0 <= self.alpha1 < 1):
            raise ConfigInvalid("ARCH(1) needs alpha0 > 0 and 0 <= alpha1 < 1")

    @classmethod
    def gaussian(cls, covariance) -> "InnovationSpec":
        return cls("iid-gaussian", covariance=covariance)

    @classmethod
    def arch(cls, alpha0: float, alpha1: float, loading=None) -> "InnovationSpec":
        return cls("arch1", alpha0=alpha0, alpha1=alpha1, loading=loading)

    def factor(self, n: int) -> np.ndarray:
        if self.kind == "iid-gaussian":
            S = np.eye(n) if self.covariance is None else self.covariance
            return np.linalg.cholesky(S)
        return np.eye(n) if self.loading is None else self.loading

    def draw(self, rng, T: int, n: int) -> np.ndarray:
        gen = as_generator(rng)
        L = self.factor(n)
        if L.shape != (n, n):
            raise DimensionMismatch(f"innovation factor is {L.shape}, expected {(n, n)}")
        e = gen.standard_normal((T, n))
        if self.kind == "arch1":
            e = _arch_filter(e, self.alpha0, self.alpha1)
        return e @ L.T


@nb.njit(cache=True)
def _arch_filter(e, alpha0, alpha1):
    v = np.empty_like(e)
    T, n = e.shape
    for j in range(n):
        prev = 0.0
        for t in range(T):
            prev = np.sqrt(alpha0 + alpha1 * prev * prev) * e[t, j]
            v[t, j] = prev
    return v


@nb.njit(cache=True)
def _recurse(A, c, y, u, bound):
    """Fill ``y[p:]`` in place; return the first offending row or -1."""
    p, n, _ = A.shape
    for t in range(p, y.shape[0]):
        for i in range(n):
            acc = c[i] + u[t - p, i]
            for l in range(p):
                row = y[t - 1 - l]
                for j in range(n):
                    acc += A[l, i, j] * row[j]
            if not abs(acc) <= bound:
                return t
            y[t, i] = acc
    return -1


@nb.njit(cache=True)
def _recurse_batch(A, c, Y, U, bound):
    """Batched version of :func:`_recurse` on ``Y`` of shape (B, T, n)."""
    B = Y.shape[0]
    failed = np.zeros(B, dtype=np.bool_)
    for b in range(B):
        if _recurse(A, c, Y[b], U[b], bound) >= 0:
            failed[b] = True
    return failed


def recurse(coeffs: VarCoefficients, initial: np.ndarray, innovations: np.ndarray) -> np.ndarray:
    """Iterate the VAR from ``p`` initial rows; returns ``p + len(innovations)`` rows."""
    p, n = coeffs.p, coeffs.n
    initial = np.asarray(initial, dtype=float).reshape(p, n)
    u = np.ascontiguousarray(innovations, dtype=float).reshape(-1, n)
    y = np.empty((p + u.shape[0], n))
    y[:p] = initial
    bad = _recurse(np.ascontiguousarray(coeffs.lag_blocks), coeffs.intercept_or_zero(), y, u, OVERFLOW_BOUND)
    if bad >= 0:
        raise ExplosiveOverflow(f"|y_t| exceeded {OVERFLOW_BOUND:g} at t={bad - p + 1}")
    return y


def recurse_batch(coeffs: VarCoefficients, Y: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Fill rows ``p:`` of every path in ``Y`` (shape ``(B, T, n)``) in place.

    Returns a boolean mask of paths that overflowed.
    """
    return _recurse_batch(
        np.ascontiguousarray(coeffs.lag_blocks), coeffs.intercept_or_zero(), Y, np.ascontiguousarray(U), OVERFLOW_BOUND
    )


@dataclass(frozen=True)
class SimulatedSample:
    data: np.ndarray
    innovations: np.ndarray
    burn_in: int = 0

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def simulate(
    coeffs: VarCoefficients,
    innovations: InnovationSpec | np.ndarray | None = None,
    T: int = 240,
    init: str = "zero",
    rng=None,
    initial=None,
    burn_in: int = 0,
) -> SimulatedSample:
    """Simulate ``T`` observations from a VAR.

    Parameters
    ----------
    coeffs : VarCoefficients
    innovations : InnovationSpec or ndarray, optional
        A law to draw from, or a ``(T + burn_in, n)`` array used verbatim.
        Defaults to i.i.d. standard normal.
    T : int
    init : {"zero", "given"}
        Zero pre-sample values, or the ``p`` rows passed as ``initial``
        (oldest first).
    rng : RngStream, Generator or int, optional
    burn_in : int
        Extra leading observations simulated and then discarded.

    Raises
    ------
    ExplosiveOverflow
        If any ``|y_t|`` exceeds ``1e100``.
    """
    n, p = coeffs.n, coeffs.p
    total = T + burn_in
    if T < p + 1:
        raise ValueError(f"T={T} must be at least p + 1 = {p + 1}")
    if innovations is None:
        innovations = InnovationSpec()
    if isinstance(innovations, InnovationSpec):
        u = innovations.draw(rng, total, n)
    else:
        u = np.asarray(innovations, dtype=float).reshape(total, n)
    if init == "zero":
        y0 = np.zeros((p, n))
    elif init == "given":
        if initial is None:
            raise ValueError("init='given' requires initial values")
        y0 = initial
    else:
        raise ValueError(f"unknown init policy {init!r}")
    y = recurse(coeffs, y0, u)[p:]
    data, u = y[burn_in:], u[burn_in:]
    data.setflags(write=False)
    u.setflags(write=False)
    return SimulatedSample(data, u, burn_in)


def as_data(sample) -> np.ndarray:
    """Return the ``T x n`` observation matrix of a sample or raw array."""
    data = sample.data if isinstance(sample, SimulatedSample) else np.asarray(sample, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    return data


# ---------------------------------------------------------------------------
# JSON coefficient files


def coefficients_to_dict(coeffs: VarCoefficients, innovations: InnovationSpec | None = None) -> dict:
    out = {
        "n": coeffs.n,
        "p": coeffs.p,
        "lag_blocks": [block.ravel().tolist() for block in coeffs.lag_blocks],
        "intercept": None if coeffs.intercept is None else coeffs.intercept.tolist(),
    }
    if innovations is not None:
        if innovations.kind == "iid-gaussian":
            cov = innovations.covariance
            params = {"covariance": None if cov is None else cov.ravel().tolist()}
        else:
            params = {"alpha0": innovations.alpha0, "alpha1": innovations.alpha1}
            if innovations.loading is not None:
                params["loading"] = innovations.loading.ravel().tolist()
        out["innovation"] = {"kind": innovations.kind, "params": params}
    return out


def coefficients_from_dict(d: dict) -> tuple[VarCoefficients, InnovationSpec | None]:
    """Parse the coefficient-file schema; raises ConfigInvalid naming the bad field."""
    try:
        n, p = int(d["n"]), int(d["p"])
    except KeyError as exc:
        raise ConfigInvalid(f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError):
        raise ConfigInvalid("fields 'n' and 'p' must be integers") from None
    if n < 1 or p < 1:
        raise ConfigInvalid("'n' and 'p' must be positive")
    blocks = d.get("lag_blocks")
    try:
        blocks = np.asarray(blocks, dtype=float).reshape(p, n, n)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"field 'lag_blocks' must hold {p} row-major {n}x{n} blocks") from None
    intercept = d.get("intercept")
    if intercept is not None:
        intercept = np.asarray(intercept, dtype=float)
        if intercept.shape != (n,):
            raise ConfigInvalid(f"field 'intercept' must have length {n}")
    innov = None
    spec = d.get("innovation")
    if spec is not None:
        kind = spec.get("kind")
        params = spec.get("params") or {}
        if kind == "iid-gaussian":
            cov = params.get("covariance")
            cov = None if cov is None else np.asarray(cov, dtype=float).reshape(n, n)
            innov = InnovationSpec.gaussian(cov)
        elif kind == "arch1":
            loading = params.get("loading")
            loading = None if loading is None else np.asarray(loading, dtype=float).reshape(n, n)
            innov = InnovationSpec.arch(float(params.get("alpha0", 0.3)), float(params.get("alpha1", 0.7)), loading)
        else:
            raise ConfigInvalid(f"field 'innovation.kind' has unknown value {kind!r}")
    return VarCoefficients(blocks, intercept), innov


def load_coefficients(path) -> tuple[VarCoefficients, InnovationSpec | None]:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: malformed JSON ({exc})") from None
    return coefficients_from_dict(d)


def save_coefficients(path, coeffs: VarCoefficients, innovations: InnovationSpec | None = None) -> None:
    Path(path).write_text(json.dumps(coefficients_to_dict(coeffs, innovations), indent=2))


def warn_if_explosive(coeffs: VarCoefficients) -> bool:
    radius = coeffs.spectral_radius()
    if radius > 1 + 1e-12:
        warnings.warn(f"companion spectral radius {radius:.4f} > 1: explosive DGP", RuntimeWarning, stacklevel=2)
        return True
    return False

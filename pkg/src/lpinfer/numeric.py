"""Least squares, quantiles and reproducible random streams.

Everything here is pure given its inputs. Least squares goes through a
Householder QR factorisation (LAPACK ``geqrf`` via :func:`numpy.linalg.qr`);
lag-augmented regressors built from near-unit-root data are badly conditioned
and the normal equations lose too many digits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, EmptyInput, RankDeficient

RANK_TOL = 1e-10


@dataclass(frozen=True)
class OlsFit:
    """Result of an ordinary least squares fit.

    ``coefficients`` has shape ``(k,)`` for a vector response and ``(k, m)``
    when ``y`` has ``m`` columns; ``residuals`` matches the shape of ``y``.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    xtx_inv: np.ndarray
    effective_sample: int

    @property
    def regressor_cross_product_inverse(self) -> np.ndarray:
        return self.xtx_inv


def ols(y, X) -> OlsFit:
    """Least squares of ``y`` on the columns of ``X``.

    Parameters
    ----------
    y : array_like, shape (N,) or (N, m)
    X : array_like, shape (N, k)

    Returns
    -------
    OlsFit

    Raises
    ------
    DimensionMismatch
        If ``y`` and ``X`` disagree on the number of rows.
    RankDeficient
        If the smallest singular value of ``X`` is below ``1e-10`` times the
        largest, or there are fewer rows than columns.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
    N, k = X.shape
    if N < k:
        raise RankDeficient(f"{N} observations for {k} regressors")
    Q, R = np.linalg.qr(X)
    s = np.linalg.svd(R, compute_uv=False)
    if k and (s[-1] <= RANK_TOL * s[0] or not np.all(np.isfinite(s))):
        raise RankDeficient(f"condition number {s[0] / max(s[-1], 1e-300):.3g} exceeds 1e10")
    R_inv = np.linalg.solve(R, np.eye(k))
    coef = R_inv @ (Q.T @ y)
    resid = y - X @ coef
    return OlsFit(coef, resid, R_inv @ R_inv.T, N)


def batched_ols(Y, W):
    """OLS on a stack of independent design matrices.

    ``W`` has shape ``(B, N, k)`` and ``Y`` shape ``(B, N)`` or
    ``(B, N, m)``. Returns ``(coef, resid, R_inv, Q, ok)`` where ``ok`` flags
    the systems whose design passed the rank check; the others carry NaN
    coefficients.
    """
    Q, R = np.linalg.qr(W)
    s = np.linalg.svd(R, compute_uv=False)
    ok = np.isfinite(s).all(axis=1) & (s[:, -1] > RANK_TOL * s[:, 0])
    if not ok.all():
        R = R.copy()
        R[~ok] = np.eye(R.shape[-1])
    R_inv = np.linalg.inv(R)
    vector = Y.ndim == 2
    Ym = Y[..., None] if vector else Y
    coef = R_inv @ (Q.transpose(0, 2, 1) @ Ym)
    coef[~ok] = np.nan
    resid = Ym - W @ coef
    if vector:
        coef, resid = coef[..., 0], resid[..., 0]
    return coef, resid, R_inv, Q, ok


def quantile(samples, p: float) -> float:
    """Type-7 sample quantile (linear interpolation at ``(n - 1) p``)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInput("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return float(np.quantile(x, p, method="linear"))


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Backed by the counter-based Philox generator, so any stream can be
    produced directly without consuming the ones before it.
    """

    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))


_PURPOSE_BITS = 16


def derive_stream(root_seed: int, repetition: int, purpose: int = 0) -> RngStream:
    """Map ``(root_seed, repetition, purpose)`` to its own stream.

    The stream id packs ``repetition`` into the high 48 bits and ``purpose``
    into the low 16, which is collision free over that range.
    """
    if not 0 <= purpose < 1 << _PURPOSE_BITS:
        raise ValueError(f"purpose must be in [0, 65535], got {purpose}")
    if not 0 <= repetition < 1 << (64 - _PURPOSE_BITS):
        raise ValueError(f"repetition out of range: {repetition}")
    return RngStream(int(root_seed), (int(repetition) << _PURPOSE_BITS) | int(purpose))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, an int seed or None."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    return rng

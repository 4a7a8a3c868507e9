"""Asymptotic variances in the homoskedastic AR(1) model and efficiency frontiers.

With ``y_t = rho y_{t-1} + u_t`` and i.i.d. homoskedastic innovations the
three estimators of ``rho^h`` have limiting variances (scaled by ``T``)

* lag-augmented LP:      ``sum_{l=0}^{h-1} rho^(2l)``
* lag-augmented AR:      ``(h rho^(h-1))^2``
* non-augmented LP:      ``sum_{l=0}^{h-1} rho^(2l) + sum_{l=1}^{h-1} rho^(2l) - (2h-1) rho^(2h)``

The indifference functions solve for the ``|rho|`` at which the
lag-augmented LP variance equals one of the other two.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, UndefinedAtH1

BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class AsyVarTriple:
    lp_la: float
    lp_na: float
    ar_la: float
    rho: float
    horizon: int


def asyvar(rho: float, h: int) -> AsyVarTriple:
    """Asymptotic variances of the three estimators of ``rho^h``.

    Raises
    ------
    DomainError
        If ``|rho| >= 1``.
    """
    if not abs(rho) < 1:
        raise DomainError(f"|rho| must be < 1, got {rho}")
    if h < 1:
        raise ValueError("h must be >= 1")
    r2 = rho * rho
    powers = r2 ** np.arange(h)
    lp_la = float(powers.sum())
    lp_na = float(lp_la + powers[1:].sum() - (2 * h - 1) * r2**h)
    ar_la = float((h * rho ** (h - 1)) ** 2)
    return AsyVarTriple(lp_la, lp_na, ar_la, float(rho), int(h))


def _bisect_x(f, lo: float, hi: float) -> float:
    """Root of an increasing ``f`` on ``[lo, hi]`` in ``x = rho^-2``, returned as ``rho``."""
    while hi - lo > BISECTION_TOL * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return float(1.0 / np.sqrt(0.5 * (lo + hi)))


def indifference_lp_vs_arla(h: int) -> float:
    """``|rho|`` where lag-augmented LP and lag-augmented AR are equally efficient.

    Solves ``sum_{m=0}^{h-1} x^m = h^2`` for ``x = rho^-2 > 1``. LP is weakly
    more efficient for ``|rho|`` at or above the returned value.
    """
    if h < 2:
        raise ValueError("the LP/AR indifference point needs h >= 2")

    def f(x):
        return sum(x**m for m in range(h)) - h * h

    # f(1) = h - h^2 < 0 and f(h^2) >= h^2 > 0
    return _bisect_x(f, 1.0, float(h * h))


def indifference_lp_vs_lpna(h: int) -> float:
    """``|rho|`` where augmented and non-augmented LP are equally efficient.

    Solves ``sum_{l=1}^{h-1} x^l = 2h - 1`` for ``x = rho^-2``. Augmented LP
    is weakly more efficient for ``|rho|`` at or below the returned value.

    Raises
    ------
    UndefinedAtH1
        At ``h = 1`` the non-augmented projection always wins.
    """
    if h == 1:
        raise UndefinedAtH1("no indifference point at h = 1: non-augmented LP is always more efficient")
    if h < 1:
        raise ValueError("h must be >= 1")

    def f(x):
        return sum(x**l for l in range(1, h)) - (2 * h - 1)

    # f(1) = (h - 1) - (2h - 1) < 0 and f(2h - 1) >= 0
    return _bisect_x(f, 1.0, float(2 * h - 1))

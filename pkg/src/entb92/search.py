"""Derivative-free 1-D search: golden-section maximization and bisection.

The rate landscapes have kinks (where the rate crosses zero and where the
privacy-amplification radicand vanishes), so nothing here uses gradients.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQ = (3 - math.sqrt(5)) / 2


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-8) -> tuple[float, float, int]:
    """Maximize a unimodal f on [a, b].

    Returns ``(x, f(x), n_evals)``. The bracket ends are evaluated too, so a
    maximum sitting on the boundary is not missed. Ties go to the smaller x.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    c, d = a + INV_PHI_SQ * h, a + INV_PHI * h
    fc, fd = f(c), f(d)
    n = 2
    while h > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + INV_PHI_SQ * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + INV_PHI * h
            fd = f(d)
        n += 1
    candidates = [(a, f(a)), (c, fc), (d, fd), (b, f(b))]
    n += 2
    best = max(candidates, key=lambda t: (t[1], -t[0]))
    return float(best[0]), float(best[1]), n


def bisect(f: Callable, lo, hi, tol: float = 1e-10, max_iter: int = 200):
    """Locate a sign change of f between lo and hi, elementwise over arrays.

    f must be ``<= 0`` at ``lo`` and ``> 0`` at ``hi`` (or the reverse);
    returns ``(lo, hi)`` with ``hi - lo <= tol`` bracketing the change.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    lo, hi = np.broadcast_arrays(lo, hi)
    lo, hi = lo.copy(), hi.copy()
    pos_hi = np.asarray(f(hi)) > 0
    if np.any(pos_hi == (np.asarray(f(lo)) > 0)):
        raise ValueError("bisection bracket does not straddle a sign change")
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        same_as_hi = (np.asarray(f(mid)) > 0) == pos_hi
        hi = np.where(same_as_hi, mid, hi)
        lo = np.where(same_as_hi, lo, mid)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def grid_argmax(values: np.ndarray) -> tuple[int, ...]:
    """Index of the largest finite entry; the first (smallest-index) one on ties."""
    v = np.where(np.isfinite(values), values, -np.inf)
    return np.unravel_index(int(np.argmax(v)), v.shape)

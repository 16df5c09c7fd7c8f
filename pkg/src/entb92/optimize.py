"""Angle optimization of the key rate and threshold-efficiency searches.

Angles are in radians. The 2-D searches run a coarse grid followed by
coordinate-wise golden-section refinement; every grid and every reduction
is deterministic, and ties resolve to the smaller angle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError
from .keyrate import Efficiencies, binary_entropy, f_ch
from .loss import ch_coefficients
from .search import bisect, golden_section_max, grid_argmax
from .states import NOISELESS, NoiseParams, coincidence_grid

HALF_PI = np.pi / 2
THETA_MIN = 1e-9
ANGLE_TOL = 1e-8
ETA_TOL = 1e-5

Protocol = Literal["generalized", "entb92"]
Mode = Literal["full-di", "1sdi"]


@dataclass(frozen=True)
class OptimizationResult:
    best_theta: float
    best_phi: float
    best_value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    theta: float
    phi: float
    achieved_rate_above: float
    iterations: int
    converged: bool


def rate_surface(theta, phi, eta_a, eta_b, noise: NoiseParams = NOISELESS):
    """Post-selected rate r with S_CH predicted under loss, broadcast over all arguments.

    Points without conclusive events (theta = phi = 0) carry no key and
    evaluate to 0.
    """
    theta = np.clip(np.asarray(theta, dtype=float), THETA_MIN, HALF_PI)
    phi = np.clip(np.asarray(phi, dtype=float), 0.0, HALF_PI)
    table = coincidence_grid(theta, phi, noise)
    both, alice, bob = ch_coefficients(table)
    eta_a = np.asarray(eta_a, dtype=float)
    eta_b = np.asarray(eta_b, dtype=float)
    s = eta_a * eta_b * both - eta_a * alice - eta_b * bob
    pr = table.probs
    pc = 0.5 * pr[..., 0, :, :, 0].sum(axis=(-1, -2))
    errors = 0.5 * pr[..., 0, 0, 0, 0] + 0.5 * pr[..., 0, 1, 1, 0]
    has_key = pc > 1e-300
    q = np.clip(np.where(has_key, errors / np.where(has_key, pc, 1.0), 0.0), 0.0, 1.0)
    r = eta_b * pc * (eta_a * (1 - binary_entropy(q)) - np.log2(f_ch(s)))
    r = np.where(has_key, r, 0.0)
    return float(r) if np.ndim(r) == 0 else r


def _etas(mode: Mode, eta: float) -> tuple[float, float]:
    if mode == "full-di":
        return eta, eta
    if mode == "1sdi":
        return 1.0, eta
    raise DomainError(f"unknown mode {mode!r}")


def optimal_phi_for_violation(theta):
    """Bob angle arctan(sin theta), which maximizes the lossless CH violation."""
    return np.arctan(np.sin(theta))


def optimal_phi_for_rate(theta: float, eff: Efficiencies = Efficiencies(), noise: NoiseParams = NOISELESS) -> float:
    """phi maximizing the post-selected rate at fixed theta (1e-3 grid, then golden section)."""
    step = 1e-3
    grid = np.linspace(0.0, HALF_PI, int(np.ceil(HALF_PI / step)) + 1)
    vals = rate_surface(theta, grid, eff.eta_a, eff.eta_b, noise)
    (i,) = grid_argmax(vals)
    lo, hi = max(0.0, grid[i] - step), min(HALF_PI, grid[i] + step)
    x, fx, _ = golden_section_max(lambda p: rate_surface(theta, p, eff.eta_a, eff.eta_b, noise), lo, hi, ANGLE_TOL)
    return x if fx >= vals[i] else float(grid[i])


def _maximize_1d(f, lo: float, hi: float, n_grid: int, tol: float) -> tuple[float, float, int]:
    grid = np.linspace(lo, hi, n_grid)
    vals = f(grid)
    (i,) = grid_argmax(vals)
    step = grid[1] - grid[0]
    x, fx, n = golden_section_max(f, max(lo, grid[i] - step), min(hi, grid[i] + step), tol)
    if fx < vals[i]:
        return float(grid[i]), float(vals[i]), n + n_grid
    return float(x), float(fx), n + n_grid


def maximize_rate(
    eta_a: float,
    eta_b: float,
    noise: NoiseParams = NOISELESS,
    protocol: Protocol = "generalized",
    n_grid: int = 60,
    max_sweeps: int = 400,
    starts: tuple[tuple[float, float], ...] = (),
) -> OptimizationResult:
    """Best post-selected rate over the angles.

    ``protocol="entb92"`` ties phi to theta; ``"generalized"`` searches both
    angles, seeded by the best of its grid and the tied optimum so it never
    reports less than the tied protocol. Extra ``starts`` (warm starts) are
    refined as well.
    """
    diag = _maximize_1d(lambda t: rate_surface(t, t, eta_a, eta_b, noise), THETA_MIN, HALF_PI, 20 * n_grid, ANGLE_TOL)
    if protocol == "entb92":
        return OptimizationResult(diag[0], diag[0], diag[1], diag[2], True)
    if protocol != "generalized":
        raise DomainError(f"unknown protocol {protocol!r}")

    thetas = np.linspace(THETA_MIN, HALF_PI, n_grid)
    phis = np.linspace(0.0, HALF_PI, n_grid)
    vals = rate_surface(thetas[:, None], phis[None, :], eta_a, eta_b, noise)
    i, j = grid_argmax(vals)
    seeds = [(float(thetas[i]), float(phis[j]), float(vals[i, j])), (diag[0], diag[0], diag[1])]
    seeds += [(t, p, rate_surface(t, p, eta_a, eta_b, noise)) for t, p in starts]
    step = HALF_PI / (n_grid - 1)
    best = None
    total = n_grid * n_grid + diag[2]
    for t, p, v in seeds:
        t, p, v, n, ok = _coordinate_ascent(t, p, v, eta_a, eta_b, noise, step, max_sweeps)
        total += n
        if best is None or v > best[2]:
            best = (t, p, v, ok)
    return OptimizationResult(float(best[0]), float(best[1]), float(best[2]), total, best[3])


def _coordinate_ascent(theta, phi, value, eta_a, eta_b, noise, width, max_sweeps):
    n = 0
    for _ in range(max_sweeps):
        t_new, v_t, k1 = golden_section_max(
            lambda t: rate_surface(t, phi, eta_a, eta_b, noise),
            max(THETA_MIN, theta - width), min(HALF_PI, theta + width), ANGLE_TOL,
        )
        if v_t > value:
            theta, value = t_new, v_t
        p_new, v_p, k2 = golden_section_max(
            lambda p: rate_surface(theta, p, eta_a, eta_b, noise),
            max(0.0, phi - width), min(HALF_PI, phi + width), ANGLE_TOL,
        )
        n += k1 + k2
        moved = abs(p_new - phi) if v_p > value else 0.0
        gain = v_p - value
        if v_p > value:
            phi, value = p_new, v_p
        if moved < ANGLE_TOL and gain <= 1e-15:
            return theta, phi, value, n, True
        # follow narrow ridges with a bracket scaled to the last step
        width = max(10 * moved, 1e-6)
    return theta, phi, value, n, False


def best_theta_entb92_trusted() -> OptimizationResult:
    """theta maximizing the phi = theta rate with both devices trusted."""
    f = lambda t: rate_surface(t, t, 1.0, 1.0)
    step = 1e-3
    x, fx, n = _maximize_1d(f, THETA_MIN, HALF_PI, int(HALF_PI / step) + 1, 1e-10)
    return OptimizationResult(x, x, fx, n, True)


def crossover_theta_trusted(lo: float = np.radians(60.0), hi: float = np.radians(80.0)) -> float:
    """theta where the maximal-violation angle starts beating phi = theta (trusted devices)."""
    g = lambda t: rate_surface(t, optimal_phi_for_violation(t), 1.0, 1.0) - rate_surface(t, t, 1.0, 1.0)
    lo_, hi_ = bisect(g, lo, hi, tol=1e-10)
    return 0.5 * (lo_ + hi_)


def di_threshold_symmetric(
    noise: NoiseParams = NOISELESS,
    protocol: Protocol = "generalized",
    lo: float = 0.5,
    hi: float = 1.0,
    tol: float = ETA_TOL,
) -> ThresholdResult:
    """Smallest eta_a = eta_b = eta with a positive optimized rate."""
    return _eta_threshold("full-di", noise, protocol, lo, hi, tol)


def _eta_threshold(mode: Mode, noise, protocol, lo, hi, tol) -> ThresholdResult:
    top = maximize_rate(*_etas(mode, hi), noise, protocol)
    # warm start from the optimum at the current upper end of the bracket
    best = lambda eta: maximize_rate(
        *_etas(mode, eta), noise, protocol, starts=((top.best_theta, top.best_phi),)
    )
    if top.best_value <= 0:
        raise DomainError(f"no positive rate even at eta = {hi}")
    if best(lo).best_value > 0:
        raise DomainError(f"rate already positive at eta = {lo}; widen the bracket")
    steps = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = best(mid)
        if res.best_value > 0:
            hi, top = mid, res
        else:
            lo = mid
        steps += 1
    above = best(min(1.0, hi + 1e-4))
    return ThresholdResult(0.5 * (lo + hi), top.best_theta, top.best_phi, above.best_value, steps, True)


def bob_threshold_for_rate(theta, phi=None, noise: NoiseParams = NOISELESS, tol: float = 1e-12):
    """eta_b where the rate with eta_a = 1 turns positive; NaN where it never does.

    Vectorized over theta (and phi; phi defaults to theta).
    """
    theta = np.asarray(theta, dtype=float)
    phi = theta if phi is None else np.asarray(phi, dtype=float)
    theta, phi = np.broadcast_arrays(theta, phi)
    ok = rate_surface(theta, phi, 1.0, 1.0, noise) > 0
    safe_t = np.where(ok, theta, HALF_PI)
    safe_p = np.where(ok, phi, np.pi / 4)
    lo, hi = bisect(lambda e: rate_surface(safe_t, safe_p, 1.0, e, noise), np.zeros_like(theta), np.ones_like(theta), tol)
    out = np.where(ok, 0.5 * (np.asarray(lo) + np.asarray(hi)), np.nan)
    return float(out) if out.ndim == 0 else out


def sdi_threshold_bob(
    noise: NoiseParams = NOISELESS,
    theta_lo: float = np.radians(0.5),
    theta_hi: float = HALF_PI,
    step: float = np.radians(0.1),
) -> ThresholdResult:
    """Infimum over theta of Bob's positive-rate threshold (Alice trusted, phi = theta)."""
    grid = np.linspace(theta_lo, theta_hi, int(round((theta_hi - theta_lo) / step)) + 1)
    thr = bob_threshold_for_rate(grid, noise=noise)
    if np.all(np.isnan(thr)):
        raise DomainError("no theta gives a positive one-sided rate")
    (i,) = grid_argmax(-thr)
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    t, neg, n = golden_section_max(lambda t: -_nan_to_inf(bob_threshold_for_rate(t, noise=noise)), a, b, ANGLE_TOL)
    if -neg > thr[i]:
        t, neg = float(grid[i]), -float(thr[i])
    eta = -neg
    above = rate_surface(t, t, 1.0, min(1.0, eta + 1e-4), noise)
    return ThresholdResult(float(eta), float(t), float(t), float(above), len(grid) + n, True)


def _nan_to_inf(x):
    return np.inf if np.isnan(x) else x


def rate_vs_eta_curve(
    mode: Mode,
    eta_grid,
    noise: NoiseParams = NOISELESS,
    protocol: Protocol = "generalized",
) -> list[tuple[float, float, float, float]]:
    """Optimized rate per efficiency as ``(eta, rate, theta, phi)`` rows."""
    rows = []
    for eta in np.asarray(eta_grid, dtype=float):
        res = maximize_rate(*_etas(mode, float(eta)), noise, protocol)
        rows.append((float(eta), res.best_value, res.best_theta, res.best_phi))
    return rows

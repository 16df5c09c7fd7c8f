"""CH parameter and threshold efficiencies under detection loss.

Tables hold lossless Born probabilities conditioned on the basis pair.
Non-detections follow the protocol's fixed assignment: on A1, B0 and B1 a
missing click counts as the barred outcome, on A0 Alice picks a0 or a0bar
at random.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoViolationError
from .keyrate import Efficiencies
from .search import bisect
from .states import CoincidenceTable


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _entries(table: CoincidenceTable):
    pr = table.probs
    # pr[..., alice basis, bob basis, alice outcome, bob outcome]
    return dict(
        a1b1=pr[..., 1, 1, 0, 0],
        a1b0=pr[..., 1, 0, 0, 0],
        a1b0bar=pr[..., 1, 0, 0, 1],
        a0b0=pr[..., 0, 0, 0, 0],
        a0b1=pr[..., 0, 1, 0, 0],
        a0barb0=pr[..., 0, 0, 1, 0],
        a0barb1=pr[..., 0, 1, 1, 0],
    )


@dataclass(frozen=True)
class PredictedProbabilities:
    """Probabilities over all generated pairs, after loss and assignment."""

    a1b1: float
    a1b0: float
    a0b1: float
    a0b0: float
    a1: float
    b1: float

    def s_ch(self):
        return _out(self.a1b1 + self.a0b1 + self.a1b0 - self.a0b0 - self.a1 - self.b1)


def predict_probabilities(table: CoincidenceTable, eff: Efficiencies) -> PredictedProbabilities:
    p = _entries(table)
    ea, eb = eff.eta_a, eff.eta_b
    return PredictedProbabilities(
        a1b1=_out(ea * eb * p["a1b1"]),
        a1b0=_out(ea * eb * p["a1b0"]),
        a0b1=_out(ea * eb * p["a0b1"] + (1 - ea) * eb * 0.5 * (p["a0b1"] + p["a0barb1"])),
        a0b0=_out(ea * eb * p["a0b0"] + (1 - ea) * eb * 0.5 * (p["a0b0"] + p["a0barb0"])),
        a1=_out(ea * (p["a1b0"] + p["a1b0bar"])),
        b1=_out(eb * (p["a0b1"] + p["a0barb1"])),
    )


def ch_coefficients(table: CoincidenceTable):
    """S_CH = eta_a eta_b * D - eta_a * A - eta_b * M, returned as (D, A, M)."""
    p = _entries(table)
    both = (
        p["a1b1"]
        + 0.5 * p["a0b1"]
        + p["a1b0"]
        - 0.5 * p["a0b0"]
        + 0.5 * p["a0barb0"]
        - 0.5 * p["a0barb1"]
    )
    alice = p["a1b0"] + p["a1b0bar"]
    bob = 0.5 * (p["a0b1"] + p["a0barb1"] + p["a0b0"] + p["a0barb0"])
    return both, alice, bob


def predict_s_ch(table: CoincidenceTable, eff: Efficiencies):
    """Predicted CH parameter at efficiencies ``eff`` from a lossless table."""
    both, alice, bob = ch_coefficients(table)
    return _out(eff.eta_a * eff.eta_b * both - eff.eta_a * alice - eff.eta_b * bob)


def _threshold(num, den, batched: bool, what: str):
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    eta = np.where(eta <= 1.0, eta, np.nan)
    if not batched and np.isnan(eta):
        raise NoViolationError(f"no {what} efficiency in [0, 1] violates the CH inequality")
    return _out(eta)


def threshold_symmetric(table: CoincidenceTable):
    """Smallest eta_a = eta_b = eta giving S_CH > 0.

    Raises NoViolationError for a single table without a threshold in
    [0, 1]; batched tables get NaN at such entries instead.
    """
    both, alice, bob = ch_coefficients(table)
    return _threshold(alice + bob, both, bool(table.batch_shape), "symmetric")


def threshold_bob(table: CoincidenceTable):
    """Smallest eta_b giving S_CH > 0 when Alice's device is trusted (eta_a = 1)."""
    p = _entries(table)
    num = p["a1b0"] + p["a1b0bar"]
    den = p["a1b1"] + p["a1b0"] - p["a0b0"] - p["a0barb1"]
    return _threshold(num, den, bool(table.batch_shape), "Bob")


def threshold_by_bisection(table: CoincidenceTable, mode: str = "symmetric", tol: float = 1e-10, prescan: int = 1000) -> float:
    """Root of eta -> predict_s_ch on [0, 1] by bisection.

    Assumes one sign change on the bracket; a ``prescan``-point scan checks
    that assumption first.
    """
    if table.batch_shape:
        raise ValueError("bisection works on a single table")
    if mode == "symmetric":
        s = lambda eta: predict_s_ch(table, Efficiencies(eta, eta))
    elif mode == "bob":
        s = lambda eta: predict_s_ch(table, Efficiencies(1.0, eta))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    scan = np.array([s(e) for e in np.linspace(0.0, 1.0, prescan)])
    changes = np.count_nonzero(np.diff(scan > 0))
    if changes == 0 or scan[-1] <= 0:
        raise NoViolationError(f"no {mode} efficiency in [0, 1] violates the CH inequality")
    if changes > 1:
        raise ValueError("S_CH changes sign more than once on [0, 1]")
    s_vec = np.vectorize(s)
    lo, hi = bisect(s_vec, 0.0, 1.0, tol=tol)
    return 0.5 * (lo + hi)

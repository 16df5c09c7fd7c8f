"""Closed-form protocol quantities: conclusive probability, QBERs, the CH
parameter and the asymptotic secret-key rates.

All functions accept scalars or numpy arrays and broadcast. Rates are
returned raw; a negative rate means no key can be distilled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UndefinedQBERError
from .states import NOISELESS, CoincidenceTable, NoiseParams, protocol_table

F_CH_TOL = 1e-12
# radicands this close to 0 are rounding noise (S at its quantum maximum)
F_CH_SNAP = 1e-14


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class Efficiencies:
    """Overall (transmission times detection) efficiencies of Alice and Bob."""

    eta_a: float = 1.0
    eta_b: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.eta_a <= 1.0 and 0.0 <= self.eta_b <= 1.0):
            raise DomainError(f"efficiencies must lie in [0, 1], got {self.eta_a}, {self.eta_b}")

    @classmethod
    def symmetric(cls, eta: float) -> Efficiencies:
        return cls(eta, eta)


PERFECT = Efficiencies(1.0, 1.0)


def binary_entropy(x):
    """h2(x) in bits, with 0 log 0 = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise DomainError("binary entropy needs x in [0, 1]")
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    h = -xs * np.log2(xs) - (1 - xs) * np.log2(1 - xs)
    return _out(np.where(inside, h, 0.0))


def conclusive_prob(theta, phi):
    return _out(0.5 * (1 - np.cos(theta) * np.cos(phi)))


def qber_ps(theta, phi):
    """Theoretical QBER of the post-selected key for the noiseless state."""
    theta, phi = np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    den = 2 - 2 * np.cos(theta) * np.cos(phi)
    if np.any(den <= 0):
        raise UndefinedQBERError("no conclusive events: P_c = 0")
    return _out((1 - np.cos(theta - phi)) / den)


def qber_conclusive(q_ps, eta_a):
    """QBER over all conclusive events when Alice's missing clicks are random bits."""
    return _out(eta_a * np.asarray(q_ps, dtype=float) + (1 - eta_a) / 2)


def f_ch(s):
    """Privacy-amplification factor 1 + sqrt(1 - 4S - 4S^2)."""
    s = np.asarray(s, dtype=float)
    rad = 1 - 4 * s - 4 * s * s
    if np.any(rad < -F_CH_TOL):
        raise DomainError("CH value exceeds the quantum maximum")
    rad = np.where(rad <= F_CH_SNAP, 0.0, rad)
    return _out(1 + np.sqrt(rad))


def s_ch_ideal(theta, phi):
    """CH parameter of the noiseless state at unit efficiency."""
    return _out(0.5 * (np.cos(phi) + np.sin(theta) * np.sin(phi) - 1))


def s_ch_max(theta):
    return _out(0.5 * (np.sqrt(np.sin(theta) ** 2 + 1) - 1))


def rate_post_selected(theta, phi, eff: Efficiencies, s_ch, q_ps, *, p_c=None, test_prob=0.0):
    """Secret bits per emitted pair with post-selection on Alice's detections.

    ``p_c`` overrides the noiseless conclusive probability (noisy states).
    ``test_prob`` charges the test-basis fraction against the rate; the
    asymptotic convention leaves it at 0.
    """
    pc = conclusive_prob(theta, phi) if p_c is None else p_c
    r = eff.eta_b * pc * (eff.eta_a * (1 - binary_entropy(q_ps)) - np.log2(f_ch(s_ch)))
    return _out(r * (1 - test_prob))


def rate_no_postselection(theta, phi, eff: Efficiencies, s_ch, q_c, *, p_c=None):
    pc = conclusive_prob(theta, phi) if p_c is None else p_c
    return _out(eff.eta_a * eff.eta_b * pc * (1 - binary_entropy(q_c) - np.log2(f_ch(s_ch))))


def rate_bb84_style(eff: Efficiencies, s_ch, q_ps):
    """Rate of the maximally-entangled (single key basis) protocol with post-selection."""
    return _out(eff.eta_a * eff.eta_b * (1 - binary_entropy(q_ps)) - np.log2(f_ch(s_ch)))


def rate_bb84_trusted(q):
    return _out(1 - 2 * binary_entropy(q))


def is_positive(rate) -> bool | np.ndarray:
    return np.asarray(rate) > 0


def conclusive_prob_from_table(table: CoincidenceTable):
    """P_c as Bob's average conclusive probability over his two bases."""
    a0 = table.probs[..., 0, :, :, 0]  # Alice A0 rows, Bob outcome b_j
    return _out(0.5 * a0.sum(axis=-1).sum(axis=-1))


def qber_from_table(table: CoincidenceTable):
    """Error rate of the sifted key by event counting.

    Bob's conclusive b_k decodes to bit k xor 1, so the error pairs are
    (a0, b0) and (a0bar, b1).
    """
    pr = table.probs
    errors = 0.5 * pr[..., 0, 0, 0, 0] + 0.5 * pr[..., 0, 1, 1, 0]
    pc = np.asarray(conclusive_prob_from_table(table))
    if np.any(pc <= 0):
        raise UndefinedQBERError("no conclusive events: P_c = 0")
    return _out(errors / pc)


@dataclass(frozen=True)
class RateReport:
    s_ch: float
    q_ps: float
    q_c: float
    p_c: float
    r: float
    r_old: float
    r_bb84_style: float

    @property
    def is_positive(self) -> bool:
        return self.r > 0


def rate_report(theta: float, phi: float, eff: Efficiencies = PERFECT, noise: NoiseParams = NOISELESS) -> RateReport:
    """All rate quantities at one parameter point, with S_CH predicted under loss."""
    from .loss import predict_s_ch

    table = protocol_table(theta, phi, noise)
    s = predict_s_ch(table, eff)
    q = qber_from_table(table)
    pc = conclusive_prob_from_table(table)
    qc = qber_conclusive(q, eff.eta_a)
    return RateReport(
        s_ch=s,
        q_ps=q,
        q_c=qc,
        p_c=pc,
        r=rate_post_selected(theta, phi, eff, s, q, p_c=pc),
        r_old=rate_no_postselection(theta, phi, eff, s, qc, p_c=pc),
        r_bb84_style=rate_bb84_style(eff, s, q),
    )

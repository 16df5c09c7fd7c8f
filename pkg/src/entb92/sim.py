"""Event-level Monte Carlo of the generalized ent-B92 protocol.

Randomness is event-addressed: event ``k`` always consumes the uint64 words
``[8k, 8k + 8)`` of a Philox stream keyed by the seed, so results do not
depend on how events are split into shards or how many threads run them.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .errors import DomainError, InsufficientDataError
from .keyrate import (
    Efficiencies,
    RateReport,
    conclusive_prob_from_table,
    qber_conclusive,
    qber_from_table,
    rate_bb84_style,
    rate_no_postselection,
    rate_post_selected,
)
from .loss import ch_coefficients, predict_s_ch
from .states import NOISELESS, CoincidenceTable, NoiseParams, ProtocolParams, protocol_table

DRAWS_PER_EVENT = 8  # two Philox blocks
DEFAULT_SHARD = 1 << 18
NO_CLICK = -1

# alice state index in SimResult.counts
A_UNBARRED, A_BARRED, A_FILL_UNBARRED, A_FILL_BARRED = range(4)
# bob state index
B_CONCLUSIVE, B_BARRED, B_NONE = range(3)


@dataclass(frozen=True)
class SimConfig:
    params: ProtocolParams
    noise: NoiseParams = NOISELESS
    eff: Efficiencies = Efficiencies()
    n_pairs: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if int(self.n_pairs) < 1:
            raise DomainError("n_pairs must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class EventRecords:
    """Per-event outcomes for a contiguous range of events.

    Raw outcomes are 0 (unbarred), 1 (barred) or -1 (no click). Alice's
    assigned outcome is 0/1 after the non-detection rule; Bob's assigned
    outcome is 0 for conclusive and 1 for inconclusive.
    """

    alice_basis: np.ndarray
    bob_basis: np.ndarray
    alice_raw: np.ndarray
    bob_raw: np.ndarray
    alice_assigned: np.ndarray
    bob_assigned: np.ndarray

    @property
    def bob_bit(self) -> np.ndarray:
        """Decoded key bit (basis xor 1) for conclusive events, -1 otherwise."""
        return np.where(self.bob_assigned == 0, self.bob_basis ^ 1, -1)

    def audit(self):
        """Check the assignment rules event by event."""
        undetected_a = self.alice_raw == NO_CLICK
        if np.any(undetected_a & (self.alice_basis == 1) & (self.alice_assigned == 0)):
            raise AssertionError("an undetected A1 event was assigned a1")
        if np.any((self.bob_raw == NO_CLICK) & (self.bob_assigned == 0)):
            raise AssertionError("an undetected Bob event was marked conclusive")
        if np.any((self.bob_raw == 1) & (self.bob_assigned == 0)):
            raise AssertionError("a barred Bob outcome was marked conclusive")
        detected = ~undetected_a
        if np.any(self.alice_assigned[detected] != self.alice_raw[detected]):
            raise AssertionError("a detected Alice outcome was reassigned")


def _cdfs(table: CoincidenceTable) -> np.ndarray:
    flat = table.probs.reshape(2, 2, 4)  # outcome index 2x + y
    return np.cumsum(flat, axis=-1)


def _stream(seed: int, start: int) -> np.random.Generator:
    bitgen = np.random.Philox(key=int(seed))
    bitgen.advance(start * DRAWS_PER_EVENT // 4)
    return np.random.Generator(bitgen)


def simulate_events(config: SimConfig, start: int, stop: int, table: CoincidenceTable | None = None) -> EventRecords:
    """Simulate events ``start <= k < stop`` of the run."""
    if table is None:
        table = protocol_table(config.params.theta, config.params.phi, config.noise)
    m = stop - start
    u = _stream(config.seed, start).random((m, DRAWS_PER_EVENT))
    alice_basis = (u[:, 0] < config.params.test_prob).astype(np.int64)  # 1 is the test basis
    bob_basis = (u[:, 1] >= 0.5).astype(np.int64)
    cdf = _cdfs(table)[alice_basis, bob_basis]
    joint = (u[:, 2, None] >= cdf[:, :3]).sum(axis=1)
    x, y = joint // 2, joint % 2
    det_a = u[:, 3] < config.eff.eta_a
    det_b = u[:, 4] < config.eff.eta_b

    alice_raw = np.where(det_a, x, NO_CLICK)
    # A1 misses count as a1bar, A0 misses become a random a0 / a0bar
    fill = np.where(alice_basis == 1, 1, (u[:, 5] >= 0.5).astype(np.int64))
    alice_assigned = np.where(det_a, x, fill)
    bob_raw = np.where(det_b, y, NO_CLICK)
    bob_assigned = np.where(det_b & (y == 0), 0, 1)
    return EventRecords(alice_basis, bob_basis, alice_raw, bob_raw, alice_assigned, bob_assigned)


def _count(events: EventRecords) -> np.ndarray:
    a_state = np.where(events.alice_raw == NO_CLICK, 2 + events.alice_assigned, events.alice_raw)
    b_state = np.where(events.bob_raw == NO_CLICK, B_NONE, events.bob_raw)
    idx = ((events.alice_basis * 2 + events.bob_basis) * 4 + a_state) * 3 + b_state
    return np.bincount(idx, minlength=48).reshape(2, 2, 4, 3)


@dataclass(frozen=True)
class SimResult:
    """Event counts ``counts[alice basis, bob basis, alice state, bob state]``.

    Alice states: detected a_i, detected a_i-bar, missed and assigned a_i,
    missed and assigned a_i-bar. Bob states: b_j (conclusive), b_j-bar, no click.
    """

    config: SimConfig
    counts: np.ndarray = field(repr=False)

    @property
    def n_pairs(self) -> int:
        return int(self.counts.sum())

    @property
    def n_a0(self) -> int:
        return int(self.counts[0].sum())

    @property
    def alice_detected(self) -> int:
        return int(self.counts[:, :, :2, :].sum())

    @property
    def bob_detected(self) -> int:
        return int(self.counts[:, :, :, :2].sum())

    @property
    def conclusive(self) -> int:
        return int(self.counts[..., B_CONCLUSIVE].sum())

    @property
    def inconclusive(self) -> int:
        """Detected but barred Bob outcomes."""
        return int(self.counts[..., B_BARRED].sum())

    @property
    def sifted_length(self) -> int:
        return int(self.counts[0, :, :, B_CONCLUSIVE].sum())

    @property
    def post_selected_length(self) -> int:
        return int(self.counts[0, :, :2, B_CONCLUSIVE].sum())

    @property
    def sifted_errors(self) -> int:
        # b0 decodes to bit 1 (a0bar), b1 to bit 0 (a0)
        c = self.counts[0, :, :, B_CONCLUSIVE]
        return int(c[0, A_UNBARRED] + c[0, A_FILL_UNBARRED] + c[1, A_BARRED] + c[1, A_FILL_BARRED])

    @property
    def post_selected_errors(self) -> int:
        c = self.counts[0, :, :, B_CONCLUSIVE]
        return int(c[0, A_UNBARRED] + c[1, A_BARRED])


def _threads(threads: int | None) -> int:
    """Worker count, capped by the DIQKD_THREADS environment variable."""
    n = threads if threads is not None else (os.cpu_count() or 1)
    cap = os.environ.get("DIQKD_THREADS")
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def simulate(config: SimConfig, *, threads: int | None = None, shard_size: int = DEFAULT_SHARD, audit: bool = False) -> SimResult:
    """Run the protocol for ``config.n_pairs`` emitted pairs.

    Deterministic for a given seed, independent of ``threads`` and
    ``shard_size``. ``audit`` checks the assignment rules on every event.
    """
    table = protocol_table(config.params.theta, config.params.phi, config.noise)
    n = int(config.n_pairs)
    bounds = [(s, min(s + shard_size, n)) for s in range(0, n, shard_size)]

    def run(bound):
        events = simulate_events(config, *bound, table=table)
        if audit:
            events.audit()
        return _count(events)

    workers = min(_threads(threads), len(bounds))
    if workers == 1:
        parts = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    counts = np.zeros((2, 2, 4, 3), dtype=np.int64)
    for part in parts:
        counts += part
    counts.setflags(write=False)
    return SimResult(config, counts)


@dataclass(frozen=True)
class Estimate:
    value: float
    sigma: float

    def z(self, expected: float) -> float:
        if self.sigma == 0:
            # degenerate counts (e.g. no error events at all): compare up to rounding
            if abs(self.value - expected) <= 1e-12:
                return 0.0
            return float(np.sign(self.value - expected) * np.inf)
        return (self.value - expected) / self.sigma


def _binomial(k: int, n: int, what: str) -> Estimate:
    if n == 0:
        raise InsufficientDataError(f"no events available to estimate {what}")
    f = k / n
    return Estimate(f, float(np.sqrt(f * (1 - f) / n)))


def empirical_p_c(result: SimResult) -> Estimate:
    """Conclusive fraction among Bob's detections."""
    return _binomial(result.conclusive, result.bob_detected, "P_c")


def empirical_q_ps(result: SimResult) -> Estimate:
    return _binomial(result.post_selected_errors, result.post_selected_length, "the post-selected QBER")


def empirical_q_c(result: SimResult) -> Estimate:
    return _binomial(result.sifted_errors, result.sifted_length, "the sifted QBER")


def empirical_s_ch_direct(result: SimResult) -> Estimate:
    """CH parameter from assigned outcomes, each probability conditioned on its basis pair.

    With P(a1) taken from the (A1, B0) runs and P(b1) from the (A0, B1)
    runs, the CH combination collapses to one frequency per basis pair:
    S = f11(a1, b1) - f10(a1, not b0) - f01(a0bar, b1) - f00(a0, b0).
    """
    c = result.counts
    n = c.sum(axis=(2, 3))
    if np.any(n == 0):
        raise InsufficientDataError("a basis pair has no events")
    a_un = [A_UNBARRED, A_FILL_UNBARRED]
    a_bar = [A_BARRED, A_FILL_BARRED]
    terms = [
        (+1, c[1, 1, a_un, B_CONCLUSIVE].sum(), n[1, 1]),
        (-1, c[1, 0][a_un][:, [B_BARRED, B_NONE]].sum(), n[1, 0]),
        (-1, c[0, 1, a_bar, B_CONCLUSIVE].sum(), n[0, 1]),
        (-1, c[0, 0, a_un, B_CONCLUSIVE].sum(), n[0, 0]),
    ]
    value = sum(sign * k / m for sign, k, m in terms)
    var = sum((k / m) * (1 - k / m) / m for _, k, m in terms)
    return Estimate(float(value), float(np.sqrt(var)))


def coincidence_table_estimate(result: SimResult) -> tuple[CoincidenceTable, np.ndarray]:
    """Table of double-detection frequencies per basis pair, with the pair totals."""
    both = result.counts[:, :, :2, :2].astype(float)
    n = both.sum(axis=(2, 3))
    if np.any(n == 0):
        raise InsufficientDataError("a basis pair has no coincidences")
    return CoincidenceTable(both / n[..., None, None]), n


_UNIT_TABLES = SimpleNamespace(probs=np.eye(16).reshape(16, 2, 2, 2, 2))


def _ch_weights(eff: Efficiencies) -> np.ndarray:
    """Weights w with predict_s_ch(table) = sum(w * table.probs)."""
    both, alice, bob = ch_coefficients(_UNIT_TABLES)
    w = eff.eta_a * eff.eta_b * both - eff.eta_a * alice - eff.eta_b * bob
    return w.reshape(2, 2, 2, 2)


def empirical_s_ch_predicted(result: SimResult, eff: Efficiencies | None = None) -> Estimate:
    """Project the measured coincidence table to efficiencies ``eff`` (default: the run's own)."""
    eff = result.config.eff if eff is None else eff
    table, n = coincidence_table_estimate(result)
    value = predict_s_ch(table, eff)
    w = _ch_weights(eff)
    p = table.probs
    mean = (w * p).sum(axis=(2, 3))
    var = ((w**2 * p).sum(axis=(2, 3)) - mean**2) / n
    return Estimate(float(value), float(np.sqrt(max(var.sum(), 0.0))))


@dataclass(frozen=True)
class SimEstimates:
    p_c: Estimate
    q_ps: Estimate
    q_c: Estimate
    s_ch_direct: Estimate
    s_ch_predicted: Estimate
    sifted_length: int
    post_selected_length: int


def _maybe(fn, *args):
    try:
        return fn(*args)
    except InsufficientDataError:
        return Estimate(float("nan"), float("nan"))


def estimate(result: SimResult) -> SimEstimates:
    """All empirical statistics; NaN where the counts cannot support one."""
    return SimEstimates(
        p_c=_maybe(empirical_p_c, result),
        q_ps=_maybe(empirical_q_ps, result),
        q_c=_maybe(empirical_q_c, result),
        s_ch_direct=_maybe(empirical_s_ch_direct, result),
        s_ch_predicted=_maybe(empirical_s_ch_predicted, result),
        sifted_length=result.sifted_length,
        post_selected_length=result.post_selected_length,
    )


def empirical_rates(result: SimResult) -> RateReport:
    """Key rates from the measured statistics.

    Efficiencies are the observed click fractions and S_CH is the direct
    estimate, so nothing nominal from the config enters.
    """
    n = result.n_pairs
    eff = Efficiencies(result.alice_detected / n, result.bob_detected / n)
    pc = empirical_p_c(result).value
    q = empirical_q_ps(result).value
    qc = empirical_q_c(result).value
    s = empirical_s_ch_direct(result).value
    p = result.config.params
    return RateReport(
        s_ch=s,
        q_ps=q,
        q_c=qc,
        p_c=pc,
        r=rate_post_selected(p.theta, p.phi, eff, s, q, p_c=pc),
        r_old=rate_no_postselection(p.theta, p.phi, eff, s, qc, p_c=pc),
        r_bb84_style=rate_bb84_style(eff, s, q),
    )


def expected_statistics(config: SimConfig) -> dict[str, float]:
    """Analytic value of every empirical statistic for this configuration."""
    p = config.params
    table = protocol_table(p.theta, p.phi, config.noise)
    eff = config.eff
    pc = float(conclusive_prob_from_table(table))
    q = float(qber_from_table(table)) if pc > 0 else float("nan")
    s = float(predict_s_ch(table, eff))
    sift = (1 - p.test_prob) * pc * eff.eta_b
    return {
        "p_c": pc,
        "q_ps": q,
        "q_c": float(qber_conclusive(q, eff.eta_a)),
        "s_ch_direct": s,
        "s_ch_predicted": s,
        "sifted_length": config.n_pairs * sift,
        "post_selected_length": config.n_pairs * sift * eff.eta_a,
    }


@dataclass(frozen=True)
class Comparison:
    name: str
    empirical: float
    sigma: float
    expected: float

    @property
    def z(self) -> float:
        return Estimate(self.empirical, self.sigma).z(self.expected)


def compare(result: SimResult) -> list[Comparison]:
    """Empirical statistics next to their analytic values.

    String lengths use the binomial spread of the expected count.
    """
    est = estimate(result)
    exp = expected_statistics(result.config)
    n = result.n_pairs
    rows = [
        Comparison(name, getattr(est, name).value, getattr(est, name).sigma, exp[name])
        for name in ("p_c", "q_ps", "q_c", "s_ch_direct", "s_ch_predicted")
    ]
    for name in ("sifted_length", "post_selected_length"):
        frac = exp[name] / n
        rows.append(Comparison(name, float(getattr(est, name)), float(np.sqrt(n * frac * (1 - frac))), exp[name]))
    return rows


def projected_rate(result: SimResult, eff: Efficiencies) -> float:
    """Post-selected rate predicted for efficiencies ``eff`` from a run's coincidence data.

    NaN when sampling noise pushes the projected S_CH past the quantum bound.
    """
    p = result.config.params
    s = empirical_s_ch_predicted(result, eff).value
    q = empirical_q_ps(result).value
    pc = empirical_p_c(result).value
    try:
        return float(rate_post_selected(p.theta, p.phi, eff, s, q, p_c=pc))
    except DomainError:
        return float("nan")

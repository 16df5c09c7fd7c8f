"""Two-qubit polarization states, the noise channel, measurement vectors and
Born-rule coincidence tables.

Everything is expressed in the product basis ``{HH, HV, VH, VV}``; single
photon vectors are ``(H, V)`` component pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError

PURE_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_FLOOR = -1e-10

_SQ2 = np.sqrt(0.5)

# [basis, outcome, component]; outcome 0 is a_i, outcome 1 is its orthogonal partner.
ALICE_VECTORS = np.array(
    [
        [[_SQ2, _SQ2], [_SQ2, -_SQ2]],  # A0: a0 = (H+V)/sqrt2, a0bar = (H-V)/sqrt2
        [[0.0, 1.0], [1.0, 0.0]],  # A1: a1 = V, a1bar = H
    ]
)
ALICE_VECTORS.setflags(write=False)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TwoQubitState:
    """Shared photon pair, either as a pure amplitude vector or a 4x4 density matrix."""

    kind: Literal["pure", "mixed"]
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if self.kind == "pure":
            if data.shape != (4,):
                raise DomainError(f"pure state needs 4 amplitudes, got shape {data.shape}")
            if abs(np.vdot(data, data).real - 1.0) > PURE_TOL:
                raise DomainError("amplitudes are not normalized")
        elif self.kind == "mixed":
            if data.shape != (4, 4):
                raise DomainError(f"density matrix must be 4x4, got shape {data.shape}")
            if np.max(np.abs(data - data.conj().T)) > HERMITIAN_TOL:
                raise DomainError("density matrix is not Hermitian")
            if abs(np.trace(data).real - 1.0) > TRACE_TOL:
                raise DomainError("density matrix does not have unit trace")
            if np.linalg.eigvalsh(data).min() < EIGEN_FLOOR:
                raise DomainError("density matrix is not positive semidefinite")
        else:
            raise DomainError(f"unknown state kind {self.kind!r}")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def density(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return self.data

    def purity(self) -> float:
        rho = self.density
        return float(np.trace(rho @ rho).real)


@dataclass(frozen=True)
class ProtocolParams:
    """Entanglement angle, Bob's measurement angle and Alice's test-basis probability."""

    theta: float
    phi: float
    test_prob: float = 0.05

    def __post_init__(self):
        _check_theta(self.theta)
        _check_phi(self.phi)
        if not 0.0 <= self.test_prob < 1.0:
            raise DomainError(f"test_prob must lie in [0, 1), got {self.test_prob}")


@dataclass(frozen=True)
class NoiseParams:
    """Weights of the colored (dephasing) and white (depolarizing) noise."""

    p_c: float = 0.0
    p_w: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.p_c <= 1.0 and 0.0 <= self.p_w <= 1.0):
            raise DomainError("noise weights must lie in [0, 1]")
        if self.p_c + self.p_w > 1.0:
            raise DomainError("p_c + p_w must not exceed 1")

    @property
    def is_zero(self) -> bool:
        return self.p_c == 0.0 and self.p_w == 0.0


NOISELESS = NoiseParams()


@dataclass(frozen=True)
class MeasurementOutcome:
    """One outcome of a single-photon measurement.

    ``barred`` selects the orthogonal partner, e.g. ``a0bar`` or ``b1bar``.
    """

    party: Literal["alice", "bob"]
    basis: int
    barred: bool = False

    def __post_init__(self):
        if self.party not in ("alice", "bob"):
            raise DomainError(f"unknown party {self.party!r}")
        if self.basis not in (0, 1):
            raise DomainError(f"basis index must be 0 or 1, got {self.basis!r}")

    @classmethod
    def parse(cls, label: str) -> MeasurementOutcome:
        """Build an outcome from labels such as ``"a1"``, ``"a0bar"``, ``"b1bar"``."""
        name = label.strip().lower()
        barred = name.endswith("bar")
        core = name[:-3] if barred else name
        if len(core) != 2 or core[0] not in "ab" or core[1] not in "01":
            raise DomainError(f"bad outcome label {label!r}")
        return cls("alice" if core[0] == "a" else "bob", int(core[1]), barred)

    @property
    def label(self) -> str:
        return f"{self.party[0]}{self.basis}{'bar' if self.barred else ''}"


def _check_theta(theta):
    t = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t <= 0.0) or np.any(t > np.pi / 2 + 1e-12):
        raise DomainError("theta must lie in (0, pi/2]")


def _check_phi(phi):
    p = np.asarray(phi, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < -1e-12) or np.any(p > np.pi / 2 + 1e-12):
        raise DomainError("phi must lie in [0, pi/2]")


def make_state(theta: float) -> TwoQubitState:
    """cos(theta/2)|HH> + sin(theta/2)|VV>."""
    _check_theta(theta)
    return TwoQubitState("pure", np.array([np.cos(theta / 2), 0.0, 0.0, np.sin(theta / 2)]))


def concurrence(state: TwoQubitState) -> float:
    """Wootters concurrence; for pure states this reduces to 2|ad - bc|."""
    if state.kind == "pure":
        a, b, c, d = state.data
        return float(2 * abs(a * d - b * c))
    rho = state.density
    yy = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)
    rho_tilde = yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.linalg.eigvals(rho @ rho_tilde).real, 0.0, None))
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def apply_noise(state: TwoQubitState, noise: NoiseParams) -> TwoQubitState:
    """Mix a pure pair state with dephasing and white noise.

    The colored component is the state's diagonal in the ``{HH, VV}``
    populations (phase damping), the white component is ``I/4``.
    """
    if state.kind != "pure":
        raise DomainError("noise model applies to a pure input state")
    pure = state.density
    colored = np.diag(np.diag(pure))
    rho = (1 - noise.p_c - noise.p_w) * pure + noise.p_c * colored + noise.p_w * np.eye(4) / 4
    return TwoQubitState("mixed", rho)


def bob_vectors(phi) -> np.ndarray:
    """Bob's measurement vectors, shape ``(*phi.shape, basis, outcome, component)``."""
    phi = np.asarray(phi, dtype=float)
    s, c = np.sin(phi / 2), np.cos(phi / 2)
    out = np.empty(phi.shape + (2, 2, 2))
    for k, sign in ((0, 1.0), (1, -1.0)):  # sign = (-1)^k
        out[..., k, 0, 0] = s
        out[..., k, 0, 1] = -sign * c
        out[..., k, 1, 0] = c
        out[..., k, 1, 1] = sign * s
    return out


def state_vector(outcome: MeasurementOutcome, phi: float = 0.0) -> np.ndarray:
    if outcome.party == "alice":
        return ALICE_VECTORS[outcome.basis, int(outcome.barred)].copy()
    return bob_vectors(phi)[outcome.basis, int(outcome.barred)]


def projector(outcome: MeasurementOutcome | str, phi: float = 0.0) -> np.ndarray:
    """Rank-1 single-photon projector |x><x| as a 2x2 matrix in the (H, V) basis."""
    if isinstance(outcome, str):
        outcome = MeasurementOutcome.parse(outcome)
    v = state_vector(outcome, phi)
    return np.outer(v, v)


def bob_povm(phi: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Three-outcome POVM (conclusive 0, conclusive 1, inconclusive)."""
    pi0 = 0.5 * projector(MeasurementOutcome("bob", 0), phi)
    pi1 = 0.5 * projector(MeasurementOutcome("bob", 1), phi)
    return pi0, pi1, np.eye(2) - pi0 - pi1


@dataclass(frozen=True)
class CoincidenceTable:
    """Joint outcome probabilities conditioned on the basis pair.

    ``probs[..., i, j, x, y]`` is p(x, y) for Alice basis ``i`` and Bob basis
    ``j``; outcome index 0 is the unbarred state, 1 the barred one. Leading
    axes, if present, index a batch of tables.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape[-4:] != (2, 2, 2, 2):
            raise DomainError(f"table needs trailing shape (2, 2, 2, 2), got {probs.shape}")
        if np.any(probs < -1e-12) or np.any(probs > 1 + 1e-12):
            raise DomainError("table entries must lie in [0, 1]")
        if np.max(np.abs(probs.sum(axis=(-1, -2)) - 1.0)) > 1e-12:
            raise DomainError("each basis pair must sum to 1")
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.probs.shape[:-4]

    def p(self, alice: str, bob: str) -> np.ndarray | float:
        """Look up an entry by outcome labels, e.g. ``table.p("a1", "b0bar")``."""
        x, y = MeasurementOutcome.parse(alice), MeasurementOutcome.parse(bob)
        if x.party != "alice" or y.party != "bob":
            raise DomainError("expected an Alice label then a Bob label")
        v = self.probs[..., x.basis, y.basis, int(x.barred), int(y.barred)]
        return float(v) if v.ndim == 0 else v

    def __getitem__(self, index) -> CoincidenceTable:
        return CoincidenceTable(self.probs[index])


def coincidence_probs(state: TwoQubitState, phi: float) -> CoincidenceTable:
    """Born-rule table Tr[rho (P_x (x) P_y)] for every basis pair."""
    _check_phi(phi)
    b = bob_vectors(phi)
    # kron(|x>, |y>) in the {HH, HV, VH, VV} ordering
    v = np.einsum("ixa,jyb->ijxyab", ALICE_VECTORS, b).reshape(2, 2, 2, 2, 4)
    p = np.einsum("ijxya,ab,ijxyb->ijxy", v.conj(), state.density, v).real
    return CoincidenceTable(p)


def coincidence_grid(theta, phi, noise: NoiseParams = NOISELESS) -> CoincidenceTable:
    """Batched tables for the noisy family of pair states, broadcasting over angles.

    Uses the real-amplitude mixture directly instead of building density
    matrices, so large angle grids stay cheap.
    """
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    _check_theta(theta)
    _check_phi(phi)
    ct = np.cos(theta / 2)[..., None, None, None, None]
    st = np.sin(theta / 2)[..., None, None, None, None]
    ah = ALICE_VECTORS[:, None, :, None, 0]
    av = ALICE_VECTORS[:, None, :, None, 1]
    b = bob_vectors(phi)
    bh = b[..., None, :, None, :, 0]
    bv = b[..., None, :, None, :, 1]
    amp = ct * ah * bh + st * av * bv
    p = amp**2
    if not noise.is_zero:
        colored = ct**2 * (ah * bh) ** 2 + st**2 * (av * bv) ** 2
        p = (1 - noise.p_c - noise.p_w) * p + noise.p_c * colored + noise.p_w / 4
    return CoincidenceTable(p)


def protocol_table(theta: float, phi: float, noise: NoiseParams = NOISELESS) -> CoincidenceTable:
    """Table for the (possibly noisy) pair state at one parameter point."""
    state = make_state(theta)
    if not noise.is_zero:
        state = apply_noise(state, noise)
    return coincidence_probs(state, phi)

"""Variable-strength measurements and their backaction on pure states.

Two protocols are provided.  The binary subspace protocol distinguishes a
marked subspace (a designated qubit in ``|0>``, or the upper hemisphere of a
spin) from its complement.  The N-outcome protocol probes every basis state
with its own strength.  Ancillas are never stored; each protocol is applied
through its induced Kraus map.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observables import ReducedCoefficients, qubit_zero_mask
from .state import QuantumState, as_rng

_MIN_PROB = 1e-300


@dataclass(frozen=True, eq=False)
class SubspaceMask:
    """Marks the basis states belonging to the ``eta = +1`` outcome."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool).reshape(-1)
        if m.all() or not m.any():
            raise ValueError("mask must select a proper, non-empty subspace")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def qubit(cls, dim: int, qubit: int) -> "SubspaceMask":
        """Subspace in which ``qubit`` is in ``|0>``."""
        return cls(qubit_zero_mask(dim, qubit))

    @classmethod
    def upper_half(cls, dim: int) -> "SubspaceMask":
        """First half of the basis; for a spin in the J_z basis, m > 0."""
        if dim % 2:
            raise ValueError(f"hemisphere split needs an even dimension, got {dim}")
        m = np.zeros(dim, dtype=bool)
        m[: dim // 2] = True
        return cls(m)

    @property
    def dim(self) -> int:
        return self.mask.size


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: int
    probability: float
    strength: float | tuple


def _check_strength(lam):
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"measurement strength must lie in [0, 1], got {lam}")


def _check_dims(state: QuantumState, mask: SubspaceMask):
    if state.dim != mask.dim:
        raise ValueError(f"mask dimension {mask.dim} does not match state dimension {state.dim}")


def subspace_probability(state: QuantumState, mask: SubspaceMask) -> float:
    return float(np.sum(np.abs(state.amplitudes[mask.mask]) ** 2))


def outcome_probability(state: QuantumState, mask: SubspaceMask, lam: float, eta: int) -> float:
    """P_eta = (1 + lam eta (2p - 1)) / 2 with p the weight of the marked subspace."""
    _check_strength(lam)
    _check_dims(state, mask)
    if eta not in (1, -1):
        raise ValueError(f"eta must be +1 or -1, got {eta}")
    p = subspace_probability(state, mask)
    return 0.5 * (1.0 + lam * eta * (2.0 * p - 1.0))


def _subspace_collapse(state: QuantumState, mask: SubspaceMask, lam: float, eta: int, prob: float):
    scale = np.where(mask.mask, np.sqrt(1.0 + eta * lam), np.sqrt(max(1.0 - eta * lam, 0.0)))
    psi = scale * state.amplitudes / np.sqrt(2.0 * max(prob, _MIN_PROB))
    return QuantumState(psi / np.linalg.norm(psi))


def subspace_branches(state: QuantumState, mask: SubspaceMask, lam: float):
    """Both outcomes of the binary protocol as ``[(record, post_state), ...]``.

    Outcomes with zero probability are omitted.
    """
    branches = []
    for eta in (1, -1):
        prob = outcome_probability(state, mask, lam, eta)
        if prob > 0.0:
            branches.append((MeasurementRecord(eta, prob, lam), _subspace_collapse(state, mask, lam, eta, prob)))
    return branches


def measure_subspace(state: QuantumState, mask: SubspaceMask, lam: float, rng=None):
    """Sample the binary measurement and return ``(post_state, record)``.

    The marked amplitudes are scaled by sqrt(1 + eta lam), the others by
    sqrt(1 - eta lam), and the result divided by sqrt(2 P_eta).
    """
    p_plus = outcome_probability(state, mask, lam, 1)
    eta = 1 if as_rng(rng).random() < p_plus else -1
    prob = p_plus if eta == 1 else 1.0 - p_plus
    return _subspace_collapse(state, mask, lam, eta, prob), MeasurementRecord(eta, prob, lam)


def updated_probability(p: float, lam: float, eta: int) -> float:
    """Weight of the marked subspace after outcome ``eta``."""
    return (1.0 + eta * lam) * p / (1.0 + eta * lam * (2.0 * p - 1.0))


def _general_weights(lambdas: np.ndarray) -> np.ndarray:
    """``W[M, n]``: squared Kraus amplitude of basis state n for outcome M."""
    N = lambdas.size
    return (1.0 - lambdas)[None, :] / N + np.diag(lambdas)


def _check_lambdas(state: QuantumState, lambdas) -> np.ndarray:
    lambdas = np.asarray(lambdas, dtype=float).reshape(-1)
    if lambdas.size != state.dim:
        raise ValueError(f"need {state.dim} strengths, got {lambdas.size}")
    if np.any(lambdas < 0.0) or np.any(lambdas > 1.0):
        raise ValueError("every strength must lie in [0, 1]")
    return lambdas


def general_outcome_probabilities(state: QuantumState, lambdas) -> np.ndarray:
    """P_M = 1/N + lam_M r_M - sum_n lam_n r_n / N for M = 0..N-1."""
    lambdas = _check_lambdas(state, lambdas)
    return _general_weights(lambdas) @ (np.abs(state.amplitudes) ** 2)


def general_branches(state: QuantumState, lambdas):
    """All N outcomes of the N-outcome protocol as ``[(record, post_state), ...]``."""
    lambdas = _check_lambdas(state, lambdas)
    W = _general_weights(lambdas)
    probs = W @ (np.abs(state.amplitudes) ** 2)
    out = []
    for M, prob in enumerate(probs):
        if prob <= 0.0:
            continue
        psi = np.sqrt(W[M]) * state.amplitudes / np.sqrt(prob)
        record = MeasurementRecord(M, float(prob), tuple(lambdas))
        out.append((record, QuantumState(psi / np.linalg.norm(psi))))
    return out


def measure_general(state: QuantumState, lambdas, rng=None):
    """Sample the N-outcome protocol; outcome labels are basis indices 0..N-1."""
    lambdas = _check_lambdas(state, lambdas)
    W = _general_weights(lambdas)
    probs = W @ (np.abs(state.amplitudes) ** 2)
    cdf = np.cumsum(probs)
    # side="right" never lands on a zero-probability outcome
    M = int(np.searchsorted(cdf, as_rng(rng).random() * cdf[-1], side="right"))
    psi = np.sqrt(W[M]) * state.amplitudes / np.sqrt(probs[M])
    return QuantumState(psi / np.linalg.norm(psi)), MeasurementRecord(M, float(probs[M]), tuple(lambdas))


def weak_increments(coeffs: ReducedCoefficients, lam: float, lam2: float, xi: int, xi2: int):
    """Ito increments (dr, dR, dC) of weakly monitoring qubit 0 (``lam``) and qubit 1 (``lam2``)."""
    r, R, C = coeffs.r, coeffs.R, coeffs.C
    dr = 2 * xi * lam * r * (1 - r) + 2 * xi2 * lam2 * C
    dR = 2 * xi2 * lam2 * R * (1 - R) + 2 * xi * lam * C
    dC = 2 * C * (
        xi * lam * (1 - 2 * r)
        - 2 * lam**2 * r * (1 - r)
        + xi2 * lam2 * (1 - 2 * R)
        - 2 * lam2**2 * R * (1 - R)
    )
    return dr, dR, dC

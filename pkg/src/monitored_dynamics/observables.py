"""Statistical quantities extracted from pure states.

Bit ordering: qubit 0 is the most significant bit of the basis index, so for
two qubits the basis is ``|00>, |01>, |10>, |11>`` and qubit 0 in ``|0>``
selects the first half of the coefficients while qubit 1 in ``|0>`` selects
every other one starting with the first.

All ``*_arrays`` helpers accept batches of amplitude vectors (last axis is the
basis) and are what the trajectory runner uses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .state import amplitudes_of

# Reported in place of the overlap x when a conditional state vanishes.
UNDEFINED_OVERLAP = -1.0


@dataclass(frozen=True)
class ReducedCoefficients:
    """The two-qubit triple (r, R, C) together with the concurrence."""

    r: float
    R: float
    C: float
    concurrence: float = 0.0

    def coefficients(self) -> np.ndarray:
        """Reconstructed (|alpha|^2, |beta|^2, |gamma|^2, |delta|^2)."""
        r, R, C = self.r, self.R, self.C
        return np.array([C + r * R, r * (1 - R) - C, R * (1 - r) - C, (1 - r) * (1 - R) + C])


class ConditionalDecomposition(NamedTuple):
    r: float
    x: float


def n_qubits(dim: int) -> int:
    q = int(dim).bit_length() - 1
    if dim < 2 or (1 << q) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return q


def probability_coefficients(state) -> np.ndarray:
    return np.abs(amplitudes_of(state)) ** 2


def qubit_zero_mask(dim: int, qubit: int) -> np.ndarray:
    """Boolean mask of basis states in which ``qubit`` is in ``|0>``."""
    q = n_qubits(dim)
    if not 0 <= qubit < q:
        raise ValueError(f"qubit {qubit} out of range for {q} qubits")
    bits = (np.arange(dim) >> (q - 1 - qubit)) & 1
    return bits == 0


def qubit_marginal(state, qubit: int) -> float | np.ndarray:
    """Probability R_m that ``qubit`` is found in ``|0>``."""
    probs = probability_coefficients(state)
    mask = qubit_zero_mask(probs.shape[-1], qubit)
    out = probs[..., mask].sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def two_qubit_arrays(amps: np.ndarray):
    """Vectorized (r, R, C, concurrence^2) for two-qubit amplitude batches."""
    amps = np.asarray(amps)
    if amps.shape[-1] != 4:
        raise ValueError(f"two-qubit quantities need dimension 4, got {amps.shape[-1]}")
    a, b, c, d = (amps[..., k] for k in range(4))
    pa, pb, pc, pd = (np.abs(v) ** 2 for v in (a, b, c, d))
    r = pa + pb
    R = pa + pc
    C = pa * pd - pb * pc
    conc2 = 4.0 * np.abs(a * d - b * c) ** 2
    return r, R, C, conc2


def two_qubit_coefficients(state) -> ReducedCoefficients:
    amps = amplitudes_of(state)
    if amps.ndim != 1 or amps.size != 4:
        raise ValueError("two_qubit_coefficients needs a single state of dimension 4")
    r, R, C, conc2 = two_qubit_arrays(amps)
    return ReducedCoefficients(float(r), float(R), float(C), float(np.sqrt(conc2)))


def conditional_arrays(amps: np.ndarray, monitored_qubit: int = 0):
    """Vectorized (r, x) of the conditional decomposition; x undefined -> -1."""
    amps = np.asarray(amps)
    dim = amps.shape[-1]
    if n_qubits(dim) < 2:
        raise ValueError("conditional decomposition needs at least two qubits")
    mask = qubit_zero_mask(dim, monitored_qubit)
    psi0 = amps[..., mask]
    psi1 = amps[..., ~mask]
    r = np.sum(np.abs(psi0) ** 2, axis=-1)
    overlap2 = np.abs(np.sum(psi0.conj() * psi1, axis=-1)) ** 2
    denom = r * (1.0 - r)
    ok = denom > 1e-300
    x = np.where(ok, overlap2 / np.where(ok, denom, 1.0), UNDEFINED_OVERLAP)
    x = np.where(ok, np.clip(x, 0.0, 1.0), x)
    return r, x


def conditional_decomposition(state, monitored_qubit: int = 0) -> ConditionalDecomposition:
    """Split the state by the monitored qubit into two conditional vectors.

    Returns ``r``, the squared norm of the branch where the monitored qubit is
    in ``|0>``, and ``x`` defined through |<psi0|psi1>|^2 = r (1 - r) x.  When a
    branch vanishes ``x`` is :data:`UNDEFINED_OVERLAP`.
    """
    amps = amplitudes_of(state)
    r, x = conditional_arrays(amps, monitored_qubit)
    return ConditionalDecomposition(float(r), float(x))

"""Pure states, Haar-random sampling, GUE generators and the Wiener unitary step."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

NORM_TOL = 1e-12


def as_rng(rng=None) -> np.random.Generator:
    """Return ``rng`` if it is a Generator, else seed a new one from it."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Normalized pure state in the computational basis.

    The amplitude array is copied on construction and marked read-only, so a
    state can be shared freely; operations return new states.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size < 2:
            raise ValueError(f"dimension must be at least 2, got {amps.size}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (|psi|^2 = {norm2!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, amplitudes) -> "QuantumState":
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero vector cannot be normalized")
        return cls(amps / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm_error(self) -> float:
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __repr__(self):
        return f"QuantumState(dim={self.dim}, amplitudes={np.array2string(self.amplitudes, precision=4)})"


def amplitudes_of(state) -> np.ndarray:
    """Amplitude array of a :class:`QuantumState` or array-like (batched allowed)."""
    if isinstance(state, QuantumState):
        return state.amplitudes
    return np.asarray(state, dtype=np.complex128)


def new_basis_state(dim: int, index: int) -> QuantumState:
    if dim < 2:
        raise ValueError(f"dimension must be at least 2, got {dim}")
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} out of range for dimension {dim}")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[index] = 1.0
    return QuantumState(amps)


def sample_haar_state(dim: int, rng=None) -> QuantumState:
    """Uniformly random pure state: i.i.d. complex Gaussians, then normalized."""
    return QuantumState.from_unnormalized(haar_amplitudes(dim, 1, rng)[0])


def haar_amplitudes(dim: int, count: int, rng=None) -> np.ndarray:
    """``(count, dim)`` array of Haar-random normalized amplitude vectors."""
    if dim < 2:
        raise ValueError(f"dimension must be at least 2, got {dim}")
    rng = as_rng(rng)
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def gue_from_normals(z: np.ndarray, dim: int) -> np.ndarray:
    """GUE matrix from ``dim**2`` standard normals (layout as in the kernels)."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.shape != (dim * dim,):
        raise ValueError(f"expected {dim * dim} normals, got shape {z.shape}")
    H = np.empty((dim, dim), dtype=np.complex128)
    _kernels.gue_fill(z, H)
    return H


def sample_gue_generator(dim: int, rng=None) -> np.ndarray:
    """Hermitian generator from the GUE normalized so that E[H^2] = 1.

    Diagonal entries are real with variance 1/N; off-diagonal entries are
    complex with real and imaginary parts of variance 1/(2N) each.
    """
    if dim < 2:
        raise ValueError(f"dimension must be at least 2, got {dim}")
    return gue_from_normals(as_rng(rng).standard_normal(dim * dim), dim)


def hermitian_expi(H: np.ndarray, epsilon: float) -> np.ndarray:
    """exp(i epsilon H) for Hermitian ``H`` via its eigendecomposition."""
    w, v = np.linalg.eigh(H)
    return (v * np.exp(1j * epsilon * w)) @ v.conj().T


def truncated_step_operator(H: np.ndarray, epsilon: float) -> np.ndarray:
    """Second-order form 1 + i eps H - eps^2/2 used only as a cross-check.

    This is the ensemble-averaged expansion (H^2 replaced by its mean, the
    identity); it is not unitary.
    """
    one = np.eye(H.shape[0], dtype=np.complex128)
    return one + 1j * epsilon * H - 0.5 * epsilon**2 * one


def unitary_step(state: QuantumState, epsilon: float, rng=None, generator: np.ndarray | None = None) -> QuantumState:
    """One step of the noisy unitary (Wiener) dynamics, psi -> exp(i eps H) psi.

    ``generator`` may be given to reuse a specific draw of H; otherwise a
    fresh one is sampled from ``rng``.
    """
    if not 0.0 <= epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in [0, 0.5], got {epsilon}")
    H = sample_gue_generator(state.dim, rng) if generator is None else generator
    psi = hermitian_expi(H, epsilon) @ state.amplitudes
    return QuantumState(psi / np.linalg.norm(psi))

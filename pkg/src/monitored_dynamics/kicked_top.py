"""Monitored quantum kicked top.

The Floquet operator F = F_x F_y combines a torsion about x with rotations,
F_x = exp(-i k/(2j+1) J_x^2 - i beta_x J_x) and F_y = exp(-i beta_y J_y).
Each factor is cut into ``n_slices`` equal slices and a binary
hemisphere measurement (J_z > 0 versus J_z < 0) follows every slice.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .measurement import SubspaceMask
from .state import as_rng, haar_amplitudes

TAPS = ("every-slice", "rotation-end", "torsion-end")


@dataclass(frozen=True)
class SpinOperators:
    j: float
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray

    @property
    def dim(self) -> int:
        return self.jz.shape[0]


def build_spin_operators(j) -> SpinOperators:
    """Angular momentum matrices in the J_z eigenbasis ordered m = j, j-1, ..., -j."""
    two_j = Fraction(j) * 2
    if two_j.denominator != 1 or two_j < 0:
        raise ValueError(f"j must be a nonnegative integer or half-integer, got {j}")
    j = float(j)
    dim = int(two_j) + 1
    m = j - np.arange(dim)
    # <m+1| J+ |m> sits one row above the diagonal in this ordering
    ladder = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jplus = np.diag(ladder, k=1).astype(np.complex128)
    jminus = jplus.conj().T
    jx = 0.5 * (jplus + jminus)
    jy = -0.5j * (jplus - jminus)
    jz = np.diag(m).astype(np.complex128)
    return SpinOperators(j, jx, jy, jz)


@dataclass(frozen=True)
class TopConfig:
    j: float = 7.5
    k: float = 8.0
    beta_x: float = 0.8
    beta_y: float = 2.0
    n_slices: int = 10
    lam: float = 0.1
    tap: str = "every-slice"

    def __post_init__(self):
        two_j = Fraction(self.j) * 2
        if two_j.denominator != 1 or two_j % 2 != 1:
            raise ValueError(f"j must be a half-integer so that the hemispheres balance, got {self.j}")
        if self.n_slices < 1:
            raise ValueError("n_slices must be at least 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.tap not in TAPS:
            raise ValueError(f"tap must be one of {TAPS}, got {self.tap!r}")

    @property
    def dim(self) -> int:
        return int(2 * self.j) + 1

    @property
    def effective_strength(self) -> float:
        """Lambda = lam^2 n_slices."""
        return self.lam**2 * self.n_slices


def _expm_hermitian(G: np.ndarray, scale: float) -> np.ndarray:
    """exp(-i scale G) for Hermitian G."""
    w, v = np.linalg.eigh(G)
    return (v * np.exp(-1j * scale * w)) @ v.conj().T


def floquet_slices(config: TopConfig):
    """The n-th roots of F_x and F_y, with n = ``config.n_slices``."""
    ops = build_spin_operators(config.j)
    gx = config.k / (2 * config.j + 1) * (ops.jx @ ops.jx) + config.beta_x * ops.jx
    gy = config.beta_y * ops.jy
    return _expm_hermitian(gx, 1.0 / config.n_slices), _expm_hermitian(gy, 1.0 / config.n_slices)


def hemisphere_mask(config: TopConfig) -> SubspaceMask:
    return SubspaceMask.upper_half(config.dim)


def run_top_slices(config: TopConfig, periods: int, rng=None, burn_in: int = 1000, block: int = 4096) -> np.ndarray:
    """Upper-hemisphere probability after every slice, shape ``(periods, 2 n_slices)``.

    Columns ``0 .. n_slices-1`` follow the F_x slices, the rest the F_y slices.
    The first ``burn_in`` periods are simulated and dropped.
    """
    rng = as_rng(rng)
    fx, fy = floquet_slices(config)
    mask = hemisphere_mask(config).mask
    psi = np.ascontiguousarray(haar_amplitudes(config.dim, 1, rng)[0])
    ns = config.n_slices
    out = np.empty((periods, 2 * ns))
    todo, done = burn_in + periods, 0
    while done < todo:
        b = min(block, todo - done)
        uni = rng.random((b, 2 * ns))
        buf = np.empty((b, 2 * ns))
        _kernels.top_block(psi, fx, fy, ns, mask, float(config.lam), uni, buf)
        lo = max(burn_in - done, 0)
        if lo < b:
            start = done + lo - burn_in
            out[start : start + b - lo] = buf[lo:]
        done += b
    return out


def tap_samples(slices: np.ndarray, n_slices: int, tap: str) -> np.ndarray:
    if tap == "every-slice":
        return slices.reshape(-1)
    if tap == "torsion-end":
        return slices[:, n_slices - 1].copy()
    if tap == "rotation-end":
        return slices[:, 2 * n_slices - 1].copy()
    raise ValueError(f"unknown tap {tap!r}")


def run_monitored_top(config: TopConfig, steps: int, rng=None, burn_in: int = 1000) -> np.ndarray:
    """Stream of the upper-hemisphere probability r at ``config.tap`` over ``steps`` periods."""
    slices = run_top_slices(config, steps, rng, burn_in=burn_in)
    return tap_samples(slices, config.n_slices, config.tap)

"""Compiled inner loops for trajectory simulation.

Everything here works on raw numpy arrays; the public modules wrap these
with validation and the immutable :class:`~monitored_dynamics.state.QuantumState`.
Random numbers are always drawn by the caller from a ``numpy.random.Generator``
and passed in, so results are reproducible from a seed.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# Absolute size of the last Taylor term kept when applying exp(i eps H).
_TAYLOR_TOL = 1e-17
_TAYLOR_MAX_TERMS = 200


@njit(cache=True)
def gue_fill(z, H):
    """Write a GUE matrix built from ``N*N`` standard normals ``z`` into ``H``.

    Layout of ``z``: the ``N`` diagonal entries first, then real/imaginary
    pairs for the upper triangle in row-major order.  Diagonal entries get
    variance 1/N and each off-diagonal entry total variance 1/N, so that the
    ensemble average of H^2 is the identity.
    """
    N = H.shape[0]
    sd = 1.0 / math.sqrt(N)
    so = 1.0 / math.sqrt(2.0 * N)
    k = 0
    for n in range(N):
        H[n, n] = z[k] * sd
        k += 1
    for n in range(N):
        for m in range(n + 1, N):
            h = complex(z[k] * so, z[k + 1] * so)
            k += 2
            H[n, m] = h
            H[m, n] = h.conjugate()


@njit(cache=True)
def expi_apply(H, psi, eps, term, nxt):
    """In place ``psi <- exp(i eps H) psi`` by a Taylor series run to convergence."""
    N = psi.shape[0]
    for n in range(N):
        term[n] = psi[n]
    k = 1
    while k <= _TAYLOR_MAX_TERMS:
        c = 1j * eps / k
        big = 0.0
        for n in range(N):
            s = 0j
            for m in range(N):
                s += H[n, m] * term[m]
            nxt[n] = c * s
        for n in range(N):
            term[n] = nxt[n]
            psi[n] += nxt[n]
            a = abs(nxt[n])
            if a > big:
                big = a
        if big < _TAYLOR_TOL:
            break
        k += 1


@njit(cache=True)
def renormalize(psi):
    s = 0.0
    for n in range(psi.shape[0]):
        s += psi[n].real ** 2 + psi[n].imag ** 2
    s = math.sqrt(s)
    for n in range(psi.shape[0]):
        psi[n] /= s


@njit(cache=True)
def measure_binary(psi, mask, lam, u):
    """Variable-strength two-outcome measurement of the subspace ``mask``.

    ``u`` is a uniform variate that selects the outcome.  Returns eta = +1/-1.
    """
    N = psi.shape[0]
    p = 0.0
    for n in range(N):
        if mask[n]:
            p += psi[n].real ** 2 + psi[n].imag ** 2
    p_plus = 0.5 * (1.0 + lam * (2.0 * p - 1.0))
    if u < p_plus:
        eta = 1
        prob = p_plus
    else:
        eta = -1
        prob = 1.0 - p_plus
    prob = max(prob, 1e-300)
    a = math.sqrt((1.0 + eta * lam) / (2.0 * prob))
    b = math.sqrt(max(1.0 - eta * lam, 0.0) / (2.0 * prob))
    for n in range(N):
        if mask[n]:
            psi[n] *= a
        else:
            psi[n] *= b
    renormalize(psi)
    return eta


@njit(cache=True)
def trajectory_block(psi, normals, uniforms, eps, masks, lams, out):
    """Advance ``psi`` through ``len(normals)`` composite steps, storing each state.

    One step = exp(i eps H) with a fresh GUE draw, then one binary measurement
    per row of ``masks`` at the matching strength in ``lams``.
    """
    N = psi.shape[0]
    H = np.empty((N, N), dtype=np.complex128)
    term = np.empty(N, dtype=np.complex128)
    nxt = np.empty(N, dtype=np.complex128)
    for t in range(normals.shape[0]):
        gue_fill(normals[t], H)
        expi_apply(H, psi, eps, term, nxt)
        for k in range(masks.shape[0]):
            if lams[k] > 0.0:
                measure_binary(psi, masks[k], lams[k], uniforms[t, k])
        out[t, :] = psi
    renormalize(psi)


@njit(cache=True)
def single_steps(psi0, normals, uniforms, eps, masks, lams, out):
    """Independent composite steps, each starting from ``psi0``."""
    N = psi0.shape[0]
    H = np.empty((N, N), dtype=np.complex128)
    term = np.empty(N, dtype=np.complex128)
    nxt = np.empty(N, dtype=np.complex128)
    psi = np.empty(N, dtype=np.complex128)
    for t in range(normals.shape[0]):
        psi[:] = psi0
        gue_fill(normals[t], H)
        expi_apply(H, psi, eps, term, nxt)
        for k in range(masks.shape[0]):
            if lams[k] > 0.0:
                measure_binary(psi, masks[k], lams[k], uniforms[t, k])
        out[t, :] = psi


@njit(cache=True)
def top_block(psi, fx, fy, n_slices, mask, lam, uniforms, out):
    """Monitored kicked-top periods.

    Each period applies ``n_slices`` times (fx slice, measurement) and then
    ``n_slices`` times (fy slice, measurement).  ``out[p, s]`` receives the
    hemisphere probability after slice ``s`` of period ``p``.
    """
    N = psi.shape[0]
    tmp = np.empty(N, dtype=np.complex128)
    for p in range(uniforms.shape[0]):
        for s in range(2 * n_slices):
            F = fx if s < n_slices else fy
            for n in range(N):
                acc = 0j
                for m in range(N):
                    acc += F[n, m] * psi[m]
                tmp[n] = acc
            psi[:] = tmp
            if lam > 0.0:
                measure_binary(psi, mask, lam, uniforms[p, s])
            r = 0.0
            for n in range(N):
                if mask[n]:
                    r += psi[n].real ** 2 + psi[n].imag ** 2
            out[p, s] = r
        renormalize(psi)

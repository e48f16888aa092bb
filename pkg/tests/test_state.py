from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from monitored_dynamics import _kernels
from monitored_dynamics.observables import two_qubit_arrays
from monitored_dynamics.state import (
    QuantumState,
    gue_from_normals,
    haar_amplitudes,
    hermitian_expi,
    new_basis_state,
    sample_gue_generator,
    sample_haar_state,
    truncated_step_operator,
    unitary_step,
)


def test_basis_states():
    s = new_basis_state(4, 0)
    np.testing.assert_array_equal(np.abs(s.amplitudes) ** 2, [1, 0, 0, 0])
    assert abs(new_basis_state(2, 1).amplitudes[0]) == 0.0
    last = new_basis_state(16, 15)
    assert last.dim == 16 and last.amplitudes[15] == 1.0
    with pytest.raises(ValueError):
        new_basis_state(4, 4)
    with pytest.raises(ValueError):
        new_basis_state(4, -1)


def test_state_validation_and_immutability():
    with pytest.raises(ValueError):
        QuantumState([1.0, 1.0])
    with pytest.raises(ValueError):
        QuantumState([1.0])
    s = QuantumState.from_unnormalized([1.0, 1j])
    assert s.norm_error() < 1e-15
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0.0


def test_haar_mean_coefficients(rng):
    amps = haar_amplitudes(4, 10**6, rng)
    np.testing.assert_allclose((np.abs(amps) ** 2).mean(axis=0), 0.25, atol=0.002)


def test_haar_single_coefficient_marginal(rng):
    x = np.abs(haar_amplitudes(4, 10**5, rng)[:, 0]) ** 2
    ks = stats.kstest(x, lambda v: 1 - (1 - v) ** 3).statistic
    assert ks < 0.01


@pytest.mark.parametrize("dim", [2, 8, 16])
def test_haar_marginal_other_dims(rng, dim):
    x = np.abs(haar_amplitudes(dim, 10**5, rng)[:, dim - 1]) ** 2
    assert stats.kstest(x, lambda v: 1 - (1 - v) ** (dim - 1)).statistic < 0.01


def test_haar_mean_concurrence_squared(rng):
    _, _, _, conc2 = two_qubit_arrays(haar_amplitudes(4, 10**6, rng))
    oracle, _ = integrate.quad(lambda y: y * 1.5 * np.sqrt(1 - y), 0, 1)
    assert abs(oracle - 0.4) < 1e-12
    assert abs(conc2.mean() - oracle) < 0.005


def test_sample_haar_state_is_normalized(rng):
    assert sample_haar_state(8, rng).norm_error() < 1e-12


def test_gue_is_hermitian(rng):
    for dim in (2, 5, 16):
        H = sample_gue_generator(dim, rng)
        assert np.max(np.abs(H - H.conj().T)) == 0.0


@pytest.mark.parametrize("dim,draws,tol", [(2, 10**5, 0.02), (16, 10**4, 0.05)])
def test_gue_second_moment_is_identity(rng, dim, draws, tol):
    z = rng.standard_normal((draws, dim * dim))
    acc = np.zeros(dim)
    H = np.empty((dim, dim), dtype=np.complex128)
    for row in z:
        _kernels.gue_fill(row, H)
        acc += np.einsum("ij,ji->i", H, H).real
    np.testing.assert_allclose(acc / draws, 1.0, atol=tol)


def test_gue_entry_variances(rng):
    dim = 4
    Hs = np.array([gue_from_normals(z, dim) for z in rng.standard_normal((40000, dim * dim))])
    assert abs(Hs[:, 1, 1].real.var() - 1 / dim) < 0.01
    assert abs(Hs[:, 0, 2].real.var() - 1 / (2 * dim)) < 0.005
    assert abs(Hs[:, 0, 2].imag.var() - 1 / (2 * dim)) < 0.005
    with pytest.raises(ValueError):
        gue_from_normals(np.zeros(3), dim)


def test_unitary_step_zero_epsilon_is_identity(rng):
    s = sample_haar_state(4, rng)
    np.testing.assert_allclose(unitary_step(s, 0.0, rng).amplitudes, s.amplitudes, atol=1e-15)


@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([2, 4, 8, 16]), eps=st.floats(0.0, 0.5))
@settings(max_examples=60, deadline=None)
def test_unitary_step_preserves_norm(seed, dim, eps):
    rng = np.random.default_rng(seed)
    s = sample_haar_state(dim, rng)
    H = sample_gue_generator(dim, rng)
    U = hermitian_expi(H, eps)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(dim), atol=1e-13)
    assert abs(np.linalg.norm(U @ s.amplitudes) ** 2 - 1) < 1e-12
    assert unitary_step(s, eps, generator=H).norm_error() < 1e-12


def test_unitary_step_rejects_large_epsilon(rng):
    with pytest.raises(ValueError):
        unitary_step(new_basis_state(2, 0), 0.6, rng)


def test_exponential_matches_truncation_to_second_order(rng):
    H = sample_gue_generator(4, rng)
    # the truncation averages H^2 to the identity, so compare the exact series to second order
    errs = []
    for eps in (0.02, 0.01, 0.005):
        exact = hermitian_expi(H, eps)
        second = np.eye(4) + 1j * eps * H - 0.5 * eps**2 * (H @ H)
        errs.append(np.abs(exact - second).max())
    assert errs[0] / errs[1] == pytest.approx(8, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(8, rel=0.05)
    # the ensemble-averaged truncation differs only in the eps^2 term
    diff = truncated_step_operator(H, 0.01) - (np.eye(4) + 0.01j * H - 0.5e-4 * (H @ H))
    np.testing.assert_allclose(diff, 0.5e-4 * (H @ H - np.eye(4)), atol=1e-15)


def test_taylor_kernel_matches_eigendecomposition(rng):
    for dim in (2, 4, 16):
        for eps in (0.02, 0.1, 0.5):
            H = sample_gue_generator(dim, rng)
            psi = sample_haar_state(dim, rng).amplitudes.copy()
            expected = hermitian_expi(H, eps) @ psi
            term = np.empty(dim, dtype=np.complex128)
            nxt = np.empty(dim, dtype=np.complex128)
            _kernels.expi_apply(H, psi, eps, term, nxt)
            np.testing.assert_allclose(psi, expected, atol=1e-13)


def test_long_chain_norm_preservation(rng):
    dim, steps = 4, 10**6
    psi = sample_haar_state(dim, rng).amplitudes.copy()
    masks = np.zeros((1, dim), dtype=bool)
    masks[0, :2] = True
    lams = np.zeros(1)
    block = 100_000
    for _ in range(steps // block):
        out = np.empty((block, dim), dtype=np.complex128)
        _kernels.trajectory_block(psi, rng.standard_normal((block, dim * dim)), rng.random((block, 1)), 0.1,
                                  masks, lams, out)
        assert np.abs(np.linalg.norm(out, axis=1) ** 2 - 1).max() < 1e-12


def test_single_step_drift_from_pole(rng):
    """From r = 1 the mean increment of r per eps^2 is 1/2 - 1."""
    eps, n = 0.1, 10**6
    psi0 = np.array([1.0, 0.0], dtype=np.complex128)
    out = np.empty((n, 2), dtype=np.complex128)
    _kernels.single_steps(psi0, rng.standard_normal((n, 4)), np.zeros((n, 1)), eps,
                          np.array([[True, False]]), np.zeros(1), out)
    dr = (np.abs(out[:, 0]) ** 2 - 1.0) / eps**2
    assert abs(dr.mean() + 0.5) < 0.01


def test_single_step_second_moment(rng):
    eps, n = 0.02, 10**6
    psi0 = np.array([np.sqrt(0.3), np.sqrt(0.7) * 1j])
    out = np.empty((n, 2), dtype=np.complex128)
    _kernels.single_steps(psi0, rng.standard_normal((n, 4)), np.zeros((n, 1)), eps,
                          np.array([[True, False]]), np.zeros(1), out)
    d2 = ((np.abs(out[:, 0]) ** 2 - 0.3) / eps) ** 2
    assert abs(d2.mean() - 0.21) < 4 * d2.std() / np.sqrt(n)

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monitored_dynamics.measurement import (
    SubspaceMask,
    general_branches,
    general_outcome_probabilities,
    measure_general,
    measure_subspace,
    outcome_probability,
    subspace_branches,
    subspace_probability,
    updated_probability,
    weak_increments,
)
from monitored_dynamics.observables import ReducedCoefficients, two_qubit_coefficients
from monitored_dynamics.state import QuantumState, haar_amplitudes, sample_haar_state


def _state_with_r(r, dim=4, rng=None):
    """Qubit-0 marginal r, otherwise random."""
    amps = haar_amplitudes(dim, 1, rng)[0]
    h = dim // 2
    amps[:h] *= np.sqrt(r) / np.linalg.norm(amps[:h])
    amps[h:] *= np.sqrt(1 - r) / np.linalg.norm(amps[h:])
    return QuantumState(amps)


def test_mask_validation():
    with pytest.raises(ValueError):
        SubspaceMask(np.ones(4, bool))
    with pytest.raises(ValueError):
        SubspaceMask(np.zeros(4, bool))
    with pytest.raises(ValueError):
        SubspaceMask.upper_half(15)
    assert SubspaceMask.upper_half(16).mask.sum() == 8
    np.testing.assert_array_equal(SubspaceMask.qubit(4, 1).mask, [1, 0, 1, 0])


def test_outcome_probability_examples(rng):
    mask = SubspaceMask.qubit(4, 0)
    assert outcome_probability(_state_with_r(0.5, rng=rng), mask, 0.7, 1) == pytest.approx(0.5)
    assert outcome_probability(_state_with_r(0.25, rng=rng), mask, 0.5, 1) == pytest.approx(0.375)
    s = _state_with_r(0.9, rng=rng)
    assert outcome_probability(s, mask, 0.0, -1) == 0.5
    assert outcome_probability(s, mask, 0.3, 1) + outcome_probability(s, mask, 0.3, -1) == 1.0
    with pytest.raises(ValueError):
        outcome_probability(s, mask, 1.5, 1)
    with pytest.raises(ValueError):
        outcome_probability(s, mask, 0.5, 0)
    with pytest.raises(ValueError):
        outcome_probability(s, SubspaceMask.qubit(8, 0), 0.5, 1)


def test_zero_strength_leaves_state(rng):
    s = sample_haar_state(4, rng)
    post, rec = measure_subspace(s, SubspaceMask.qubit(4, 0), 0.0, rng)
    np.testing.assert_allclose(post.amplitudes, s.amplitudes, atol=1e-15)
    assert rec.probability == 0.5


def test_update_example(rng):
    s = _state_with_r(0.25, rng=rng)
    branches = dict((rec.outcome, st_) for rec, st_ in subspace_branches(s, SubspaceMask.qubit(4, 0), 0.5))
    assert subspace_probability(branches[1], SubspaceMask.qubit(4, 0)) == pytest.approx(0.5, abs=1e-14)
    assert updated_probability(0.25, 0.5, 1) == pytest.approx(0.5)


def test_projective_limit(rng):
    s = _state_with_r(0.25, rng=rng)
    mask = SubspaceMask.qubit(4, 0)
    br = {rec.outcome: (rec.probability, subspace_probability(st_, mask)) for rec, st_ in subspace_branches(s, mask, 1.0)}
    assert br[1] == pytest.approx((0.25, 1.0))
    assert br[-1] == pytest.approx((0.75, 0.0))
    # an impossible outcome is never returned
    pure = QuantumState(np.array([1, 0, 0, 0]))
    assert [rec.outcome for rec, _ in subspace_branches(pure, mask, 1.0)] == [1]


def test_subspace_martingale_and_normalization(rng):
    for _ in range(1000):
        dim = int(rng.choice([2, 4, 8, 16]))
        s = sample_haar_state(dim, rng)
        m = rng.random(dim) < 0.5
        if m.all() or not m.any():
            m[0] = not m[0]
        mask = SubspaceMask(m)
        lam = rng.random()
        p = subspace_probability(s, mask)
        branches = subspace_branches(s, mask, lam)
        assert sum(rec.probability for rec, _ in branches) == pytest.approx(1.0, abs=1e-12)
        avg = sum(rec.probability * subspace_probability(st_, mask) for rec, st_ in branches)
        assert abs(avg - p) < 1e-12
        for rec, st_ in branches:
            assert st_.norm_error() < 1e-12
            assert subspace_probability(st_, mask) == pytest.approx(updated_probability(p, lam, rec.outcome), abs=1e-12)
        # every basis coefficient is a martingale too
        avg_rn = sum(rec.probability * np.abs(st_.amplitudes) ** 2 for rec, st_ in branches)
        np.testing.assert_allclose(avg_rn, np.abs(s.amplitudes) ** 2, atol=1e-12)


def test_general_martingale(rng):
    for _ in range(1000):
        dim = int(rng.choice([2, 3, 4, 8]))
        s = sample_haar_state(dim, rng)
        lams = rng.random(dim)
        branches = general_branches(s, lams)
        assert sum(rec.probability for rec, _ in branches) == pytest.approx(1.0, abs=1e-12)
        avg = sum(rec.probability * np.abs(st_.amplitudes) ** 2 for rec, st_ in branches)
        np.testing.assert_allclose(avg, np.abs(s.amplitudes) ** 2, atol=1e-12)
        assert all(st_.norm_error() < 1e-12 for _, st_ in branches)


def test_general_examples(rng):
    s = sample_haar_state(4, rng)
    np.testing.assert_allclose(general_outcome_probabilities(s, np.zeros(4)), 0.25)
    post, _ = measure_general(s, np.zeros(4), rng)
    np.testing.assert_allclose(post.amplitudes, s.amplitudes, atol=1e-15)
    flat = QuantumState(np.exp(1j * rng.random(4)) / 2)
    np.testing.assert_allclose(general_outcome_probabilities(flat, np.full(4, 0.6)), 0.25)
    with pytest.raises(ValueError):
        general_outcome_probabilities(s, np.zeros(3))
    with pytest.raises(ValueError):
        general_outcome_probabilities(s, [0.1, 0.2, 1.2, 0.0])


def test_general_two_levels_equals_binary(rng):
    mask = SubspaceMask(np.array([True, False]))
    for _ in range(1000):
        s = sample_haar_state(2, rng)
        lam = rng.random()
        binary = {rec.outcome: (rec.probability, st_.amplitudes) for rec, st_ in subspace_branches(s, mask, lam)}
        general = {rec.outcome: (rec.probability, st_.amplitudes) for rec, st_ in general_branches(s, [lam, lam])}
        for M, eta in ((0, 1), (1, -1)):
            assert abs(general[M][0] - binary[eta][0]) < 1e-12
            np.testing.assert_allclose(general[M][1], binary[eta][1], atol=1e-12)


def test_measure_general_samples_outcomes(rng):
    s = sample_haar_state(4, rng)
    lams = np.array([0.3, 0.8, 0.0, 0.5])
    probs = general_outcome_probabilities(s, lams)
    counts = np.zeros(4)
    for _ in range(20000):
        _, rec = measure_general(s, lams, rng)
        counts[rec.outcome] += 1
    np.testing.assert_allclose(counts / 20000, probs, atol=0.015)


def test_binary_second_moment(rng):
    mask = SubspaceMask.qubit(2, 0)
    for p in (0.2, 0.5, 0.7):
        s = QuantumState(np.array([np.sqrt(p), np.sqrt(1 - p)]))
        for lam in (0.05, 0.3):
            m2 = sum(rec.probability * (subspace_probability(st_, mask) - p) ** 2
                     for rec, st_ in subspace_branches(s, mask, lam))
            exact = 4 * lam**2 * p**2 * (1 - p) ** 2 / (1 - lam**2 * (2 * p - 1) ** 2)
            assert m2 == pytest.approx(exact, rel=1e-10)


def _weak_covariance(r, lams):
    """Leading-order E[dr_n dr_m] of the N-outcome protocol."""
    N = r.size
    d = r[None, :] - np.eye(N)  # row n holds r - delta_n
    return np.outer(r, r) * (N * (d * lams**2) @ d.T - np.outer(d @ lams, d @ lams))


def test_weak_limit_covariance_general_protocol(rng):
    for scale in (1e-2, 1e-3):
        s = sample_haar_state(4, rng)
        r = np.abs(s.amplitudes) ** 2
        lams = scale * rng.uniform(0.2, 1.0, 4)
        cov = sum(rec.probability * np.outer(np.abs(st_.amplitudes) ** 2 - r, np.abs(st_.amplitudes) ** 2 - r)
                  for rec, st_ in general_branches(s, lams))
        # relative corrections are O(lambda)
        np.testing.assert_allclose(cov, _weak_covariance(r, lams), rtol=20 * scale)


def test_correlation_contracts_under_measurement(rng):
    mask = SubspaceMask.qubit(4, 0)
    for _ in range(200):
        s = sample_haar_state(4, rng)
        rc = two_qubit_coefficients(s)
        lam = rng.random()
        for rec, st_ in subspace_branches(s, mask, lam):
            eta = rec.outcome
            new = two_qubit_coefficients(st_)
            factor = (1 - lam**2) / (1 + eta * lam * (2 * rc.r - 1)) ** 2
            assert new.C == pytest.approx(rc.C * factor, abs=1e-13)
            # the explicit updates of r and R
            denom = 1 + eta * lam * (2 * rc.r - 1)
            assert new.r == pytest.approx((1 + eta * lam) * rc.r / denom, abs=1e-13)
            assert new.R == pytest.approx(rc.R + 2 * eta * lam * rc.C / denom, abs=1e-13)


def test_weak_increments_examples():
    rc = ReducedCoefficients(0.5, 0.3, 0.0)
    dr, dR, dC = weak_increments(rc, 0.1, 0.0, 1, 1)
    assert dr == pytest.approx(0.05)
    assert dR == 0.0
    assert weak_increments(ReducedCoefficients(0.4, 0.3, 0.05), 0.0, 0.0, 1, -1) == (0.0, 0.0, 0.0)


@given(r=st.floats(0.05, 0.95), R=st.floats(0.05, 0.95), t=st.floats(0, 1), lam=st.floats(0, 0.2))
@settings(max_examples=100, deadline=None)
def test_weak_increments_are_odd_in_outcome(r, R, t, lam):
    lo = -min((1 - r) * (1 - R), r * R)
    hi = min(r * (1 - R), R * (1 - r))
    rc = ReducedCoefficients(r, R, lo + t * (hi - lo))
    plus = weak_increments(rc, lam, 0.0, 1, 1)
    minus = weak_increments(rc, lam, 0.0, -1, 1)
    avg = [(a + b) / 2 for a, b in zip(plus, minus)]
    assert avg[0] == pytest.approx(0.0, abs=1e-15)
    assert avg[1] == pytest.approx(0.0, abs=1e-15)
    assert avg[2] == pytest.approx(-4 * lam**2 * rc.C * r * (1 - r), abs=1e-15)


def test_weak_increments_match_exact_update_to_first_order(rng):
    mask = SubspaceMask.qubit(4, 0)
    s = sample_haar_state(4, rng)
    rc = two_qubit_coefficients(s)
    lam = 1e-4
    for rec, st_ in subspace_branches(s, mask, lam):
        new = two_qubit_coefficients(st_)
        dr, dR, dC = weak_increments(rc, lam, 0.0, rec.outcome, 1)
        assert new.r - rc.r == pytest.approx(dr, abs=1e-7)
        assert new.R - rc.R == pytest.approx(dR, abs=1e-7)
        assert new.C - rc.C == pytest.approx(dC, abs=1e-7)

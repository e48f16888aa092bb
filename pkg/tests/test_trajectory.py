from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monitored_dynamics.coefficients import Scenario
from monitored_dynamics.distributions import DistributionSpec, UnsupportedOperation, sample
from monitored_dynamics.trajectory import (
    Histogram,
    TrajectoryConfig,
    autocorrelation,
    default_targets,
    ks_distance,
    ks_two_sample,
    relaxation_steps,
    run_trajectory,
)


def test_config_defaults_and_strengths():
    cfg = TrajectoryConfig(2, 0.1, (0.1,), steps=5000)
    assert cfg.burn_in == 1000 and cfg.thinning == 100
    assert cfg.lambdas == (0.1, 0.0)
    assert cfg.Lambdas == pytest.approx((1.0, 0.0))
    assert relaxation_steps(0.02) == 2500
    sc = Scenario.two_of_two(1.0, 5.0)
    cfg = TrajectoryConfig.from_scenario(sc, 0.1, steps=5000)
    assert cfg.Lambdas == pytest.approx((1.0, 5.0))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_qubits=2, epsilon=0.1, steps=100),  # steps below default burn-in
        dict(n_qubits=2, epsilon=0.1, lambdas=(0.1, 0.1, 0.1)),
        dict(n_qubits=2, epsilon=0.0),
        dict(n_qubits=2, epsilon=0.1, lambdas=(1.5,)),
        dict(n_qubits=3, epsilon=0.1, observables=("C",)),
        dict(n_qubits=2, epsilon=0.1, observables=("entropy",)),
        dict(n_qubits=2, epsilon=0.1, thinning=0),
    ],
)
def test_config_errors(kwargs):
    with pytest.raises(ValueError):
        TrajectoryConfig(**kwargs)


def test_histogram_merge_and_density():
    a = Histogram.uniform((0.0, 1.0))
    a.add([0.1, 0.1, 0.95, 1.0])
    b = Histogram.uniform((0.0, 1.0))
    b.add([0.5])
    m = a.merge(b)
    assert m.total == 5 and m.counts.sum() == 5
    assert b.merge(a).counts.tolist() == m.counts.tolist()
    assert np.sum(m.density() * np.diff(m.bin_edges)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        a.merge(Histogram.uniform((0.0, 2.0)))
    with pytest.raises(ValueError):
        Histogram([0.0, 0.0, 1.0])


@given(chunks=st.lists(st.lists(st.floats(0, 1), max_size=30), max_size=6))
@settings(max_examples=50, deadline=None)
def test_histogram_merge_is_order_independent(chunks):
    hists = []
    for c in chunks:
        h = Histogram.uniform((0.0, 1.0))
        h.add(c)
        hists.append(h)
    total = Histogram.uniform((0.0, 1.0))
    for h in hists:
        total = total.merge(h)
    rev = Histogram.uniform((0.0, 1.0))
    for h in reversed(hists):
        rev = rev.merge(h)
    assert total.counts.tolist() == rev.counts.tolist()
    assert total.total == sum(len(c) for c in chunks)


def test_run_is_deterministic():
    cfg = TrajectoryConfig(2, 0.1, (0.1,), steps=20000, seed=42, observables=("r", "C", "conc2"))
    a, b = run_trajectory(cfg), run_trajectory(cfg)
    for k in cfg.observables:
        np.testing.assert_array_equal(a.samples[k], b.samples[k])
        np.testing.assert_array_equal(a.histograms[k].counts, b.histograms[k].counts)
    c = run_trajectory(TrajectoryConfig(2, 0.1, (0.1,), steps=20000, seed=43, observables=("r",)))
    assert not np.array_equal(a.samples["r"], c.samples["r"])


def test_sample_counts():
    cfg = TrajectoryConfig(2, 0.1, steps=21000, burn_in=1000, thinning=100, observables=("r", "R"))
    res = run_trajectory(cfg, block=3000)
    assert res.histograms["r"].total == 20000
    assert res.samples["r"].size == 200


def test_thinned_autocorrelation_is_one_relaxation_time():
    # the free marginal relaxes at rate 1 per t_eps, so the lag-one correlation is exp(-1)
    cfg = TrajectoryConfig(2, 0.1, steps=2_000_000, seed=1, observables=("r",))
    x = run_trajectory(cfg).samples["r"]
    assert autocorrelation(x) == pytest.approx(np.exp(-1), abs=0.04)
    assert autocorrelation(x[::2]) < 0.2


@pytest.mark.parametrize("lambdas", [(0.1,), (0.2, 0.1)])
def test_running_mean_stays_near_half(lambdas):
    cfg = TrajectoryConfig(2, 0.1, lambdas, steps=500_000, seed=3, observables=("r", "R"))
    res = run_trajectory(cfg)
    for k in ("r", "R"):
        x = res.samples[k]
        sigma = x.std() * np.sqrt((1 + np.exp(-1)) / (1 - np.exp(-1)) / x.size)
        assert abs(x.mean() - 0.5) < 4 * sigma


def test_ks_distance_null_and_errors(rng):
    spec = DistributionSpec("M-C-1of2", 1.0)
    n = 10**5
    assert ks_distance(sample(spec, n, rng), spec) < 1.63 / np.sqrt(n)
    with pytest.raises(ValueError):
        ks_distance([], spec)
    with pytest.raises(ValueError):
        ks_distance(np.zeros(50), spec)
    with pytest.raises(UnsupportedOperation):
        ks_distance(rng.random(200), DistributionSpec("M-joint-rRC", 1.0))
    assert ks_distance(rng.random(10**5), DistributionSpec("F-r-2q")) == pytest.approx(0.0962, abs=0.01)
    assert ks_two_sample(rng.random(1000), rng.random(1000)) < 0.1


def test_default_targets():
    free = default_targets(TrajectoryConfig(2, 0.1, steps=5000, observables=("r1", "C")))
    assert free["r1"][0].id == "F-rn-2q" and free["C"][0].id == "F-C-2q"
    mon = default_targets(TrajectoryConfig(4, 0.1, (0.1,), steps=5000, observables=("r", "R")))
    assert list(mon) == ["r"]
    spec = mon["r"][0]
    assert (spec.id, spec.N) == ("M-r-1ofq", 16) and spec.Lambda == pytest.approx(1.0)
    two = default_targets(TrajectoryConfig(2, 0.1, (0.1, 0.1), steps=5000, observables=("r", "conc2")))
    assert two["conc2"][0].phenomenological and two["conc2"][1] == 0.05

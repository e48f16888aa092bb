"""Long monitored trajectories, histograms and goodness-of-fit statistics."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .coefficients import Scenario
from .distributions import CATALOG, DistributionSpec, UnsupportedOperation, cdf, resolve
from .observables import qubit_zero_mask, two_qubit_arrays
from .state import haar_amplitudes

OBSERVABLES = ("r1", "r", "R", "C", "conc2")
SUPPORTS = {"r1": (0.0, 1.0), "r": (0.0, 1.0), "R": (0.0, 1.0), "C": (-0.25, 0.25), "conc2": (0.0, 1.0)}
HIST_BINS = 50
KS_MIN_SAMPLES = 100
KS_EXACT = 0.02
KS_PHENOMENOLOGICAL = 0.05


def relaxation_steps(epsilon: float) -> int:
    """Number of microscopic steps in one relaxation time, ceil(1/eps^2)."""
    return math.ceil(1.0 / epsilon**2 - 1e-9)


@dataclass(frozen=True)
class TrajectoryConfig:
    """One trajectory: a Wiener step at ``epsilon`` and then a binary measurement
    of qubit ``k`` at strength ``lambdas[k]`` (zero means unmonitored).

    ``steps`` counts every step including the ``burn_in`` ones.
    """

    n_qubits: int
    epsilon: float
    lambdas: tuple = ()
    steps: int = 500_000
    burn_in: int | None = None
    thinning: int | None = None
    seed: int = 0
    observables: tuple = ("r",)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("need at least one qubit")
        if not 0.0 < self.epsilon <= 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5], got {self.epsilon}")
        lams = tuple(float(v) for v in self.lambdas) + (0.0,) * (self.n_qubits - len(self.lambdas))
        if len(lams) != self.n_qubits:
            raise ValueError(f"got {len(self.lambdas)} strengths for {self.n_qubits} qubits")
        if any(not 0.0 <= v <= 1.0 for v in lams):
            raise ValueError("measurement strengths must lie in [0, 1]")
        object.__setattr__(self, "lambdas", lams)
        t = relaxation_steps(self.epsilon)
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", 10 * t)
        if self.thinning is None:
            object.__setattr__(self, "thinning", t)
        if self.burn_in < 0 or self.thinning < 1:
            raise ValueError("burn_in must be nonnegative and thinning at least 1")
        if self.steps <= self.burn_in:
            raise ValueError(f"steps ({self.steps}) must exceed burn_in ({self.burn_in})")
        obs = tuple(self.observables)
        for o in obs:
            if o not in OBSERVABLES:
                raise ValueError(f"unknown observable {o!r}; expected some of {OBSERVABLES}")
            if o in ("C", "conc2") and self.n_qubits != 2:
                raise ValueError(f"{o} is only defined for two qubits")
            if o == "R" and self.n_qubits < 2:
                raise ValueError("R needs a second qubit")
        object.__setattr__(self, "observables", obs)

    @classmethod
    def from_scenario(cls, scenario: Scenario, epsilon: float, **kwargs) -> "TrajectoryConfig":
        return cls(scenario.n_qubits, epsilon, tuple(scenario.lambdas(epsilon)), **kwargs)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def Lambdas(self) -> tuple:
        """Effective strengths lambda_k^2 / eps^2."""
        return tuple(v**2 / self.epsilon**2 for v in self.lambdas)

    def as_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "epsilon": self.epsilon,
            "lambdas": list(self.lambdas),
            "Lambdas": list(self.Lambdas),
            "steps": self.steps,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "seed": self.seed,
            "observables": list(self.observables),
        }


@dataclass
class Histogram:
    """Counts on a fixed grid of bin edges; merging adds counts."""

    bin_edges: np.ndarray
    counts: np.ndarray = None
    total: int = 0

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        if self.bin_edges.ndim != 1 or self.bin_edges.size < 2 or np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be a strictly increasing grid")
        if self.counts is None:
            self.counts = np.zeros(self.bin_edges.size - 1, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.total = int(self.counts.sum())

    @classmethod
    def uniform(cls, support, bins: int = HIST_BINS) -> "Histogram":
        return cls(np.linspace(support[0], support[1], bins + 1))

    def add(self, values) -> None:
        v = np.clip(np.asarray(values, dtype=float).ravel(), self.bin_edges[0], self.bin_edges[-1])
        c, _ = np.histogram(v, bins=self.bin_edges)
        self.counts += c
        self.total += int(c.sum())

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ValueError("cannot merge histograms with different bins")
        return Histogram(self.bin_edges.copy(), self.counts + other.counts)

    def density(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / (self.total * np.diff(self.bin_edges))

    def density_at(self, x: float) -> float:
        i = int(np.clip(np.searchsorted(self.bin_edges, x, side="right") - 1, 0, self.counts.size - 1))
        return float(self.density()[i])


@dataclass
class TrajectoryResult:
    config: TrajectoryConfig
    histograms: dict
    samples: dict  # observable -> thinned samples
    runtime_seconds: float = 0.0
    extras: dict = field(default_factory=dict)


def _observe(amps: np.ndarray, names) -> dict:
    out = {}
    probs = None
    if "C" in names or "conc2" in names:
        r, R, C, conc2 = two_qubit_arrays(amps)
        out.update(r=r, R=R, C=C, conc2=conc2)
    for name in names:
        if name in out:
            continue
        if probs is None:
            probs = np.abs(amps) ** 2
        if name == "r1":
            out[name] = probs[:, 0]
        else:
            q = 0 if name == "r" else 1
            out[name] = probs[:, qubit_zero_mask(amps.shape[1], q)].sum(axis=1)
    return {k: out[k] for k in names}


def run_trajectory(config: TrajectoryConfig, block: int = 8192) -> TrajectoryResult:
    """Simulate one trajectory from a Haar-random start.

    Histograms collect every post-burn-in step; ``samples`` keep every
    ``thinning``-th one.  The result depends only on ``config``.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    N = config.dim
    masks = np.ascontiguousarray([qubit_zero_mask(N, q) for q in range(config.n_qubits)])
    lams = np.ascontiguousarray(config.lambdas, dtype=float)
    psi = np.ascontiguousarray(haar_amplitudes(N, 1, rng)[0])
    hists = {o: Histogram.uniform(SUPPORTS[o]) for o in config.observables}
    thinned = {o: [] for o in config.observables}
    done = 0
    while done < config.steps:
        b = min(block, config.steps - done)
        normals = rng.standard_normal((b, N * N))
        uniforms = rng.random((b, masks.shape[0]))
        out = np.empty((b, N), dtype=np.complex128)
        _kernels.trajectory_block(psi, normals, uniforms, float(config.epsilon), masks, lams, out)
        first = max(config.burn_in - done, 0)
        if first < b:
            kept = out[first:]
            idx = np.arange(done + first, done + b) - config.burn_in
            pick = idx % config.thinning == 0
            for name, values in _observe(kept, config.observables).items():
                hists[name].add(values)
                thinned[name].append(values[pick])
        done += b
    samples = {k: np.concatenate(v) for k, v in thinned.items()}
    return TrajectoryResult(config, hists, samples, time.perf_counter() - start)


def _check_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < KS_MIN_SAMPLES:
        raise ValueError(f"need at least {KS_MIN_SAMPLES} samples for a KS distance, got {x.size}")
    return x


def ks_distance(samples, spec: DistributionSpec) -> float:
    """Two-sided Kolmogorov-Smirnov distance between ``samples`` and a catalog CDF."""
    if CATALOG[resolve(spec).id].joint:
        raise UnsupportedOperation(f"{spec.id} is a joint density; KS needs a scalar entry")
    x = _check_samples(samples)
    return float(stats.kstest(x, lambda v: cdf(spec, v)).statistic)


def ks_two_sample(samples, reference) -> float:
    """Two-sample Kolmogorov-Smirnov distance."""
    return float(stats.ks_2samp(_check_samples(samples), _check_samples(reference)).statistic)


def autocorrelation(x, lag: int = 1) -> float:
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x))


def default_targets(config: TrajectoryConfig) -> dict:
    """Catalog entries the observables of ``config`` should follow, where one exists.

    Returns ``{observable: (spec, threshold)}``; surrogates get the looser threshold.
    """
    L = config.Lambdas
    N = config.dim
    monitored = [k for k, v in enumerate(config.lambdas) if v > 0]
    two = config.n_qubits == 2
    table = {}
    if not monitored:
        if two:
            table = {"r1": "F-rn-2q", "r": "F-r-2q", "R": "F-r-2q", "C": "F-C-2q", "conc2": "F-conc2"}
            table = {k: DistributionSpec(v) for k, v in table.items()}
        else:
            table = {"r1": DistributionSpec("F-rn", N=N)}
            table["r"] = table["R"] = DistributionSpec("M-r-1ofq", 0.0, N=N)
    elif monitored == [0]:
        if two:
            table = {
                "r1": DistributionSpec("M-rn-1of2", L[0]),
                "r": DistributionSpec("M-r-1of2", L[0]),
                "R": DistributionSpec("M-R-1of2", L[0]),
                "C": DistributionSpec("M-C-1of2", L[0]),
                "conc2": DistributionSpec("M-conc2-1of2", L[0]),
            }
        else:
            table = {"r": DistributionSpec("M-r-1ofq", L[0], N=N)}
    elif monitored == [0, 1] and two:
        table = {
            "r": DistributionSpec("S-r-2of2", L[0], L[1]),
            "R": DistributionSpec("S-R-2of2", L[0], L[1]),
            "C": DistributionSpec("S-C-2of2", L[0], L[1]),
            "conc2": DistributionSpec("S-conc2-2of2", L[0], L[1]),
        }
    return {
        k: (spec, KS_PHENOMENOLOGICAL if spec.phenomenological else KS_EXACT)
        for k, spec in table.items()
        if k in config.observables
    }

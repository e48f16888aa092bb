"""Drift and diffusion coefficients of the reduced stochastic dynamics.

Coefficients are the first and second increment moments per unit of the
relaxation time t_eps, i.e. per eps^2 of one microscopic step.  Closed forms
are evaluated with numpy broadcasting, so every entry of a point may be an
array of the same shape.  :func:`estimate_coefficients_mc` measures the same
moments from the microscopic process and :func:`sde_step` integrates the
reduced dynamics directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from . import _kernels
from .observables import n_qubits, qubit_zero_mask, two_qubit_arrays
from .state import QuantumState, as_rng

KINDS = (
    "free-single",
    "free-multi",
    "free-two-qubit",
    "monitored-one-of-two",
    "monitored-two-of-two",
    "monitored-one-of-q",
)
_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class Scenario:
    """Which process: free or monitored, how many levels, how strongly.

    ``Lambda`` and ``Lambda2`` are the effective monitoring strengths
    lambda^2 / eps^2 of qubit 0 and qubit 1.
    """

    kind: str
    N: int = 2
    Lambda: float = 0.0
    Lambda2: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if self.Lambda < 0 or self.Lambda2 < 0:
            raise ValueError("monitoring strengths must be nonnegative")
        n_qubits(self.N)
        fixed = {"free-single": 2, "free-two-qubit": 4, "monitored-one-of-two": 4, "monitored-two-of-two": 4}
        if self.kind in fixed and self.N != fixed[self.kind]:
            object.__setattr__(self, "N", fixed[self.kind])

    @classmethod
    def free_single(cls):
        return cls("free-single", 2)

    @classmethod
    def free_multi(cls, N):
        return cls("free-multi", N)

    @classmethod
    def free_two_qubit(cls):
        return cls("free-two-qubit", 4)

    @classmethod
    def one_of_two(cls, Lambda):
        return cls("monitored-one-of-two", 4, Lambda)

    @classmethod
    def two_of_two(cls, Lambda, Lambda2):
        return cls("monitored-two-of-two", 4, Lambda, Lambda2)

    @classmethod
    def one_of_q(cls, N, Lambda):
        return cls("monitored-one-of-q", N, Lambda)

    @classmethod
    def monitored_single(cls, Lambda):
        """A lone monitored qubit, i.e. one-of-q with N = 2."""
        return cls("monitored-one-of-q", 2, Lambda)

    @property
    def n_qubits(self) -> int:
        return n_qubits(self.N)

    def lambdas(self, epsilon: float) -> np.ndarray:
        """Microscopic strengths lambda = sqrt(Lambda) eps for each qubit."""
        lam = np.zeros(self.n_qubits)
        if self.kind.startswith("monitored"):
            lam[0] = np.sqrt(self.Lambda) * epsilon
        if self.kind == "monitored-two-of-two":
            lam[1] = np.sqrt(self.Lambda2) * epsilon
        return lam

    def variables(self) -> tuple:
        if self.kind == "free-single":
            return ("r",)
        if self.kind in ("free-two-qubit",):
            return ("r", "R", "C", "conc")
        if self.kind.startswith("monitored") and self.N == 4 and self.kind != "monitored-one-of-q":
            return ("r", "R", "C")
        names = tuple(f"r{n + 1}" for n in range(self.N))
        return names + ("r",) if self.kind == "monitored-one-of-q" else names


def _pair(x, y):
    return (x, y) if (x, y) <= (y, x) else (y, x)


@dataclass
class CoefficientSet:
    """Drifts keyed by variable name and diffusions keyed by sorted name pairs."""

    drifts: dict = field(default_factory=dict)
    diffusions: dict = field(default_factory=dict)
    drift_errors: dict | None = None
    diffusion_errors: dict | None = None

    def D(self, x, y=None):
        return self.diffusions[_pair(x, x if y is None else y)]

    def matrix(self, variables) -> np.ndarray:
        """Diffusion matrix over ``variables`` (trailing two axes)."""
        rows = [[np.asarray(self.D(x, y), dtype=float) for y in variables] for x in variables]
        shape = np.broadcast_shapes(*(v.shape for row in rows for v in row))
        return np.stack([np.stack([np.broadcast_to(v, shape) for v in row], -1) for row in rows], -2)

    def drift_vector(self, variables) -> np.ndarray:
        vals = [np.asarray(self.drifts[x], dtype=float) for x in variables]
        shape = np.broadcast_shapes(*(v.shape for v in vals))
        return np.stack([np.broadcast_to(v, shape) for v in vals], -1)


def _set_D(out: dict, x, y, value):
    out[_pair(x, y)] = value


# -- closed forms -----------------------------------------------------------------


def _free_two_qubit(r, R, C):
    d = {"r": 0.5 - r, "R": 0.5 - R, "C": -1.5 * C + (0.5 - r) * (0.5 - R)}
    D = {}
    _set_D(D, "r", "r", r * (1 - r) / 2)
    _set_D(D, "R", "R", R * (1 - R) / 2)
    _set_D(D, "C", "C", (C * (1 - 2 * r) * (1 - 2 * R) - C**2 + r * (1 - r) * R * (1 - R)) / 2)
    _set_D(D, "r", "R", C / 2)
    _set_D(D, "r", "C", (0.5 - r) * C)
    _set_D(D, "R", "C", (0.5 - R) * C)
    return d, D


def _add_monitor_first(d, D, r, R, C, Lam):
    """Terms from weakly monitoring qubit 0 with effective strength ``Lam``."""
    u = r * (1 - r)
    d["C"] = d["C"] - 4 * Lam * C * u
    D[("r", "r")] = D[("r", "r")] + 4 * Lam * u**2
    D[("R", "R")] = D[("R", "R")] + 4 * Lam * C**2
    D[("C", "C")] = D[("C", "C")] + 4 * Lam * C**2 * (1 - 2 * r) ** 2
    D[("R", "r")] = D[("R", "r")] + 4 * Lam * C * u
    D[("C", "r")] = D[("C", "r")] + 4 * Lam * C * u * (1 - 2 * r)
    D[("C", "R")] = D[("C", "R")] + 4 * Lam * C**2 * (1 - 2 * r)


def _add_monitor_second(d, D, r, R, C, Lam):
    """Terms from weakly monitoring qubit 1 with effective strength ``Lam``."""
    U = R * (1 - R)
    d["C"] = d["C"] - 4 * Lam * C * U
    D[("r", "r")] = D[("r", "r")] + 4 * Lam * C**2
    D[("R", "R")] = D[("R", "R")] + 4 * Lam * U**2
    D[("C", "C")] = D[("C", "C")] + 4 * Lam * C**2 * (1 - 2 * R) ** 2
    D[("R", "r")] = D[("R", "r")] + 4 * Lam * C * U
    D[("C", "r")] = D[("C", "r")] + 4 * Lam * C**2 * (1 - 2 * R)
    D[("C", "R")] = D[("C", "R")] + 4 * Lam * C * U * (1 - 2 * R)


def _window(r, R):
    lower = -np.minimum((1 - r) * (1 - R), r * R)
    upper = np.minimum(r * (1 - R), R * (1 - r))
    return lower, upper


def _check_probability(name, v):
    if np.any(v < -_DOMAIN_TOL) or np.any(v > 1 + _DOMAIN_TOL):
        raise ValueError(f"{name} must lie in [0, 1]")


def _check_point(scenario: Scenario, point: dict):
    for name, v in point.items():
        if name != "C":
            _check_probability(name, np.asarray(v, dtype=float))
    if "C" in point:
        lo, hi = _window(np.asarray(point["r"], float), np.asarray(point["R"], float))
        C = np.asarray(point["C"], float)
        if np.any(C < lo - _DOMAIN_TOL) or np.any(C > hi + _DOMAIN_TOL):
            raise ValueError("C lies outside its constraint window for the given r and R")
    rn = [k for k in point if k.startswith("r") and k[1:].isdigit()]
    if len(rn) == scenario.N:
        total = sum(np.asarray(point[f"r{n + 1}"], float) for n in range(scenario.N))
        if np.any(np.abs(total - 1.0) > 1e-9):
            raise ValueError("probability coefficients must sum to 1")


def coefficients(scenario: Scenario, point: dict) -> CoefficientSet:
    """Closed-form drift, diffusion and cross-correlation coefficients at ``point``.

    ``point`` maps variable names to values.  Two-qubit scenarios use
    ``r``, ``R``, ``C`` (and optionally ``conc`` for the free case).
    Single-qubit and many-level scenarios use ``r1 .. rN``; the monitored
    one-of-q scenario also accepts just ``r`` for the closed equation of the
    monitored qubit.
    """
    point = {k: np.asarray(v, dtype=float) for k, v in point.items()}
    _check_point(scenario, point)
    kind, N = scenario.kind, scenario.N
    out = CoefficientSet()

    if kind == "free-single":
        r = point["r"] if "r" in point else point["r1"]
        out.drifts["r"] = 0.5 - r
        out.diffusions[("r", "r")] = r * (1 - r)
        return out

    if kind in ("free-two-qubit", "monitored-one-of-two", "monitored-two-of-two"):
        r, R, C = point["r"], point["R"], point["C"]
        d, D = _free_two_qubit(r, R, C)
        if kind != "free-two-qubit":
            _add_monitor_first(d, D, r, R, C, scenario.Lambda)
        if kind == "monitored-two-of-two":
            _add_monitor_second(d, D, r, R, C, scenario.Lambda2)
        out.drifts.update(d)
        out.diffusions.update(D)
        if kind == "free-two-qubit" and "conc" in point:
            conc = point["conc"]
            with np.errstate(divide="ignore"):
                out.drifts["conc"] = 1.0 / (4.0 * conc) - conc
            out.diffusions[("conc", "conc")] = 0.5 * (1 - conc**2)
        return out

    Lam = scenario.Lambda if kind == "monitored-one-of-q" else 0.0
    names = [f"r{n + 1}" for n in range(N)]
    if all(k in point for k in names):
        rn = [point[k] for k in names]
        r = sum(rn[: N // 2])
        x = [0.0 if n < N // 2 else 1.0 for n in range(N)]
        for n in range(N):
            out.drifts[names[n]] = 1.0 / N - rn[n]
            for m in range(n, N):
                if m == n:
                    val = (2.0 / N) * rn[n] * (1 - rn[n]) + 4 * Lam * rn[n] ** 2 * (r + x[n] - 1) ** 2
                else:
                    val = -(2.0 / N) * rn[n] * rn[m] + 4 * Lam * rn[n] * rn[m] * (r + x[n] - 1) * (r + x[m] - 1)
                _set_D(out.diffusions, names[n], names[m], val)
        if kind == "monitored-one-of-q":
            point = dict(point, r=r)
    elif kind == "free-multi":
        # each coefficient closes on its own
        for k in names:
            if k in point:
                out.drifts[k] = 1.0 / N - point[k]
                out.diffusions[(k, k)] = (2.0 / N) * point[k] * (1 - point[k])
        if not out.drifts:
            raise ValueError(f"point needs some of {names}")
        return out
    elif "r" not in point:
        raise ValueError(f"point needs either all of {names} or 'r'")

    if kind == "monitored-one-of-q":
        r = point["r"]
        out.drifts["r"] = 0.5 - r
        out.diffusions[("r", "r")] = (2.0 / N) * r * (1 - r) + 4 * Lam * r**2 * (1 - r) ** 2
    return out


# -- Monte Carlo estimation -------------------------------------------------------


def _masks_and_lams(scenario: Scenario, epsilon: float):
    lam = scenario.lambdas(epsilon)
    masks = np.array([qubit_zero_mask(scenario.N, q) for q in range(scenario.n_qubits)])
    return np.ascontiguousarray(masks), np.ascontiguousarray(lam)


def scenario_observables(scenario: Scenario, amps: np.ndarray) -> dict:
    """The scenario's variables evaluated on a batch of amplitude vectors."""
    out = {}
    probs = np.abs(amps) ** 2
    if scenario.kind == "free-single":
        out["r"] = probs[..., 0]
    elif scenario.N == 4 and scenario.kind in ("free-two-qubit", "monitored-one-of-two", "monitored-two-of-two"):
        r, R, C, conc2 = two_qubit_arrays(amps)
        out.update(r=r, R=R, C=C)
        if scenario.kind == "free-two-qubit":
            out["conc"] = np.sqrt(conc2)
    else:
        for n in range(scenario.N):
            out[f"r{n + 1}"] = probs[..., n]
        if scenario.kind == "monitored-one-of-q":
            out["r"] = probs[..., : scenario.N // 2].sum(axis=-1)
    return out


def _jackknife(block_sums: np.ndarray, block_size: int) -> tuple:
    """Mean and delete-one-block jackknife standard error from per-block sums.

    ``block_sums`` has the block index first; any trailing shape is kept.
    """
    blocks = block_sums.shape[0]
    total = block_sums.sum(axis=0)
    loo = (total - block_sums) / (block_size * (blocks - 1))
    err = np.sqrt((blocks - 1) / blocks * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return total / (block_size * blocks), err


def estimate_coefficients_mc(
    scenario: Scenario,
    state: QuantumState,
    epsilon: float,
    samples: int,
    rng=None,
    *,
    chunk: int = 100_000,
    blocks: int = 100,
) -> CoefficientSet:
    """Monte-Carlo drift and diffusion estimates with jackknife standard errors.

    Runs ``samples`` independent composite steps from ``state``: one Wiener
    unitary step at ``epsilon`` followed by a measurement of every monitored
    qubit at lambda = sqrt(Lambda) eps.  Increment moments are divided by
    eps^2.  ``samples`` is rounded down to a multiple of ``blocks``.
    """
    if state.dim != scenario.N:
        raise ValueError(f"state dimension {state.dim} does not match scenario N={scenario.N}")
    if samples < 2 * blocks:
        raise ValueError(f"need at least {2 * blocks} samples for {blocks} jackknife blocks")
    rng = as_rng(rng)
    masks, lams = _masks_and_lams(scenario, epsilon)
    psi0 = np.ascontiguousarray(state.amplitudes.copy())
    N = scenario.N
    before = {k: float(v) for k, v in scenario_observables(scenario, psi0).items()}
    names = list(before)
    samples -= samples % blocks
    incs = np.empty((samples, len(names)))
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        normals = rng.standard_normal((b, N * N))
        uniforms = rng.random((b, masks.shape[0]))
        post = np.empty((b, N), dtype=np.complex128)
        _kernels.single_steps(psi0, normals, uniforms, float(epsilon), masks, lams, post)
        after = scenario_observables(scenario, post)
        for i, k in enumerate(names):
            incs[done : done + b, i] = after[k] - before[k]
        done += b
    size = samples // blocks
    per_block = incs.reshape(blocks, size, len(names))
    mean1, err1 = _jackknife(per_block.sum(axis=1), size)
    mean2, err2 = _jackknife(np.matmul(per_block.transpose(0, 2, 1), per_block), size)
    eps2 = epsilon**2
    out = CoefficientSet(drift_errors={}, diffusion_errors={})
    for i, k in enumerate(names):
        if k == "conc" and before[k] <= 0:
            continue
        out.drifts[k], out.drift_errors[k] = mean1[i] / eps2, err1[i] / eps2
    for (i, x), (j, y) in combinations_with_replacement(enumerate(names), 2):
        if "conc" in (x, y) and x != y:
            continue
        key = _pair(x, y)
        out.diffusions[key], out.diffusion_errors[key] = mean2[i, j] / eps2, err2[i, j] / eps2
    return out


def point_of_state(scenario: Scenario, state: QuantumState) -> dict:
    """Variable assignment of the scenario read off ``state``."""
    return {k: float(v) for k, v in scenario_observables(scenario, state.amplitudes).items()}


# -- reduced SDE --------------------------------------------------------------------


def _psd_sqrt(D: np.ndarray) -> np.ndarray:
    """Symmetric square root after projecting onto the PSD cone."""
    w, v = np.linalg.eigh(0.5 * (D + np.swapaxes(D, -1, -2)))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def _reflect_unit(x):
    x = np.where(x < 0.0, -x, x)
    x = np.where(x > 1.0, 2.0 - x, x)
    return np.clip(x, 0.0, 1.0)


def sde_step(point: dict, scenario: Scenario, dt: float, rng=None) -> dict:
    """One Euler-Maruyama step of the reduced dynamics.

    ``point`` values may be arrays, in which case every entry is an
    independent walker.  Probabilities are reflected into [0, 1], a full set
    of coefficients is renormalized to unit sum, and C is clamped into its
    window.  The optional concurrence variable is not integrated.
    """
    if dt > 1e-2:
        raise ValueError(f"dt must be at most 1e-2, got {dt}")
    rng = as_rng(rng)
    point = {k: np.asarray(v, dtype=float) for k, v in point.items()}
    cs = coefficients(scenario, point)
    names = [k for k in point if k in cs.drifts and k != "conc"]
    if scenario.kind == "monitored-one-of-q" and "r" in names and len(names) > 1:
        names.remove("r")  # r follows from the coefficients
    drift = cs.drift_vector(names)
    S = _psd_sqrt(cs.matrix(names))
    z = rng.standard_normal(drift.shape)
    step = drift * dt + np.sqrt(dt) * np.einsum("...ij,...j->...i", S, z)
    new = {k: point[k] + step[..., i] for i, k in enumerate(names)}
    for k in new:
        if k != "C":
            new[k] = _reflect_unit(new[k])
    rn = [k for k in new if k[1:].isdigit()]
    if len(rn) == scenario.N:
        total = sum(new[k] for k in rn)
        for k in rn:
            new[k] = new[k] / total
        if scenario.kind == "monitored-one-of-q":
            new["r"] = sum(new[f"r{n + 1}"] for n in range(scenario.N // 2))
    if "C" in new:
        lo, hi = _window(new["r"], new["R"])
        new["C"] = np.clip(new["C"], lo, hi)
    for k, v in point.items():
        new.setdefault(k, v)
    return new

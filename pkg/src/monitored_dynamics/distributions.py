"""Closed-form stationary distributions and the tools built on them.

Every catalog entry is stored in unnormalized form; normalization constants
are always obtained by quadrature and memoized.  Scalar entries additionally
get a cumulative distribution tabulated on a fixed knot grid, which backs
inverse-CDF sampling and goodness-of-fit tests.

Identifiers
-----------
``F-*``  free (unmonitored) dynamics, ``M-*`` one designated monitored
qubit with strength ``Lambda``, ``S-*`` phenomenological surrogates for two
monitored qubits that reuse an ``M-*`` entry at an effective strength.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .state import as_rng

CDF_KNOTS = 2048
# Below this strength the monitored closed forms lose precision to cancellation
# and equal their free counterparts to O(Lambda) anyway.
_LAMBDA_FLOOR = 1e-9


class UnsupportedOperation(TypeError):
    """Raised when a scalar-only operation is requested for a joint density."""


class ConstraintWindow(NamedTuple):
    lower: float
    upper: float


def window_bounds(r, R):
    """Vectorized admissible interval of C at given (r, R)."""
    r = np.asarray(r, dtype=float)
    R = np.asarray(R, dtype=float)
    lower = -np.minimum((1 - r) * (1 - R), r * R)
    upper = np.minimum(r * (1 - R), R * (1 - r))
    return lower, upper


def constraint_window(r: float, R: float) -> ConstraintWindow:
    if not (0.0 <= r <= 1.0 and 0.0 <= R <= 1.0):
        raise ValueError("r and R must lie in [0, 1]")
    lower, upper = window_bounds(r, R)
    # -0.0 from the negation reads badly in reports
    return ConstraintWindow(float(lower) + 0.0, float(upper))


# -- building blocks ------------------------------------------------------------------


def _atanh_sqrt_one_minus_4a(a):
    """atanh(sqrt(1 - 4a)) for 0 < a <= 1/4 without cancellation near a = 0."""
    s = np.sqrt(np.clip(1.0 - 4.0 * a, 0.0, None))
    with np.errstate(divide="ignore"):
        return np.log((1.0 + s) / (2.0 * np.sqrt(a)))


def _a_times_atanh(a):
    """a * atanh(sqrt(1 - 4a)) with the continuous value 0 at a = 0."""
    a = np.asarray(a, dtype=float)
    safe = np.where(a > 0, a, 1.0)
    return np.where(a > 0, a * _atanh_sqrt_one_minus_4a(safe), 0.0)


def _free_C(C):
    a = np.abs(C)
    return 6.0 * np.sqrt(np.clip(1 - 4 * a, 0, None)) - 24.0 * _a_times_atanh(a)


def _monitored_R(R, L):
    U = R * (1 - R)
    s = np.sqrt(2 * L)
    k = np.sqrt(2 * L / (2 * L + 1))
    bracket = np.arcsinh(s) + (2 * R - 1) * np.arctanh(k * (1 - 2 * R))
    return 8 * U / (1 + 8 * L * U) + 6.0 / (s * (2 * L + 1) ** 1.5) * bracket


def _monitored_C(C, L):
    a = np.abs(C)
    root = np.sqrt(np.clip(1 - 4 * a, 0, None))
    t1 = 4 * root * (64 * L**2 * a + L * (56 * a + 4) + 5) / ((2 * L + 1) * (8 * L * a + 1))
    arg = np.sqrt(np.clip(L * (2 - 8 * a) / (2 * L + 1), 0, None))
    t2 = 2 * np.sqrt(2) * (8 * L * (32 * L**2 + 40 * L + 15) * a + 3) * np.arctanh(arg) / (
        np.sqrt(L) * (2 * L + 1) ** 1.5
    )
    t3 = -(2 * L + 1) * 128 * _a_times_atanh(a)
    return t1 + t2 + t3


def _monitored_conc2(y, L):
    g = 2 * y * L + 1
    root = np.sqrt(np.clip((1 - y) * L * (2 * L + 1), 0, None))
    arg = np.sqrt(np.clip((1 - y) * 2 * L / (2 * L + 1), 0, None))
    return (4 * ((6 * y + 4) * L + 5) * root + 6 * np.sqrt(2) * g**2 * np.arctanh(arg)) / g**2


def _monitored_rn(x, L):
    g = 1 - 8 * L * (x - 1) * x
    poly = -5 + 8 * x + (32 * x**2 * (1 - L) - 4 * (6 * x + 1)) * (1 - x) * L
    head = 8 * np.sqrt(L * (2 * L + 1)) * (x - 1) * poly
    tail = 6 * np.sqrt(2) * g**2 * (np.arcsinh(np.sqrt(2 * L)) + np.arctanh((1 - 2 * x) / np.sqrt(1 / (2 * L) + 1)))
    return (head + tail) / g**2


def _one_of_q(x, N, L):
    u = x * (1 - x)
    return u ** (N // 2 - 1) / (1 + 2 * N * L * u) ** (N // 2 + 1)


def _inside_window(r, R, C):
    lo, hi = window_bounds(r, R)
    C = np.asarray(C, dtype=float)
    inside = (C >= lo) & (C <= hi)
    inside &= (r >= 0) & (r <= 1) & (R >= 0) & (R <= 1)
    return inside


# -- catalog ------------------------------------------------------------------------------


@dataclass(frozen=True)
class _Entry:
    density: Callable  # (x, spec) -> unnormalized density on the support
    support: tuple = (0.0, 1.0)
    joint: bool = False
    monitored: bool = False
    free_limit: str | None = None  # id used when Lambda is (numerically) zero
    normalized: bool = False  # printed form already integrates to one
    symmetric: str | None = None  # "reflect" (x -> 1-x) or "even" (x -> -x)


def _dens(fn):
    return lambda x, spec: fn(np.asarray(x, dtype=float))


CATALOG = {
    "F-r1": _Entry(_dens(lambda x: np.ones_like(x)), normalized=True, symmetric="reflect"),
    "F-rn": _Entry(lambda x, s: (s.N - 1) * (1 - np.asarray(x, float)) ** (s.N - 2), normalized=True),
    "F-rn-2q": _Entry(_dens(lambda x: 3 * (1 - x) ** 2), normalized=True),
    "F-r-2q": _Entry(_dens(lambda x: 6 * x * (1 - x)), normalized=True, symmetric="reflect"),
    "F-C-2q": _Entry(_dens(_free_C), support=(-0.25, 0.25), normalized=True, symmetric="even"),
    "F-conc": _Entry(_dens(lambda x: 3 * x * np.sqrt(np.clip(1 - x**2, 0, None))), normalized=True),
    "F-conc2": _Entry(_dens(lambda y: 1.5 * np.sqrt(np.clip(1 - y, 0, None))), normalized=True),
    "F-joint-rRC": _Entry(lambda p, s: 6.0 * _inside_window(*p), joint=True, normalized=True),
    "F-joint-rR": _Entry(
        lambda p, s: 6.0 * np.minimum(np.minimum(p[0], p[1]), np.minimum(1 - p[0], 1 - p[1])),
        joint=True,
        normalized=True,
    ),
    "M-r-1q": _Entry(
        lambda x, s: 1.0 / (1 + 4 * s.Lambda * x * (1 - x)) ** 2, monitored=True, symmetric="reflect"
    ),
    "M-joint-rRC": _Entry(
        lambda p, s: _inside_window(*p) / (1 + 8 * s.Lambda * p[0] * (1 - p[0])) ** 3,
        joint=True,
        monitored=True,
    ),
    "M-r-1of2": _Entry(
        lambda x, s: x * (1 - x) / (1 + 8 * s.Lambda * x * (1 - x)) ** 3, monitored=True, symmetric="reflect"
    ),
    "M-R-1of2": _Entry(
        lambda x, s: _monitored_R(x, s.Lambda), monitored=True, free_limit="F-r-2q", symmetric="reflect"
    ),
    "M-C-1of2": _Entry(
        lambda x, s: _monitored_C(x, s.Lambda),
        support=(-0.25, 0.25),
        monitored=True,
        free_limit="F-C-2q",
        symmetric="even",
    ),
    "M-conc2-1of2": _Entry(lambda x, s: _monitored_conc2(x, s.Lambda), monitored=True, free_limit="F-conc2"),
    "M-rn-1of2": _Entry(lambda x, s: _monitored_rn(x, s.Lambda), monitored=True, free_limit="F-rn-2q"),
    "M-r-1ofq": _Entry(lambda x, s: _one_of_q(x, s.N, s.Lambda), monitored=True, symmetric="reflect"),
}

# Phenomenological stand-ins for two monitored qubits: (target id, strength rule).
SURROGATES = {
    "S-r-2of2": ("M-r-1of2", lambda L, L2: L),
    "S-R-2of2": ("M-r-1of2", lambda L, L2: L2),
    "S-C-2of2": ("M-C-1of2", lambda L, L2: L + L2),
    "S-conc2-2of2": ("M-conc2-1of2", lambda L, L2: L + L2),
}

IDS = tuple(CATALOG) + tuple(SURROGATES)


@dataclass(frozen=True)
class DistributionSpec:
    """Catalog identifier plus parameters.

    ``N`` is only used by ``F-rn`` and ``M-r-1ofq``; ``Lambda2`` only by the
    two-monitored-qubit surrogates.
    """

    id: str
    Lambda: float = 0.0
    Lambda2: float = 0.0
    N: int = 4

    def __post_init__(self):
        if self.id not in IDS:
            raise ValueError(f"unknown distribution id {self.id!r}")
        if self.Lambda < 0 or self.Lambda2 < 0:
            raise ValueError("strengths must be nonnegative")
        if self.id.startswith("F-") and (self.Lambda or self.Lambda2):
            raise ValueError(f"{self.id} describes unmonitored dynamics and takes no strength")
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two, got {self.N}")

    @property
    def phenomenological(self) -> bool:
        return self.id in SURROGATES

    @property
    def joint(self) -> bool:
        return CATALOG[resolve(self).id].joint

    @property
    def support(self) -> tuple:
        return CATALOG[resolve(self).id].support


def resolve(spec: DistributionSpec) -> DistributionSpec:
    """Map surrogates and zero-strength monitored entries to the entry actually evaluated."""
    if spec.id in SURROGATES:
        target, rule = SURROGATES[spec.id]
        spec = DistributionSpec(target, rule(spec.Lambda, spec.Lambda2), N=spec.N)
    entry = CATALOG[spec.id]
    if entry.free_limit and spec.Lambda < _LAMBDA_FLOOR:
        spec = DistributionSpec(entry.free_limit, N=spec.N)
    return spec


def metadata(spec: DistributionSpec) -> dict:
    target = resolve(spec)
    return {
        "id": spec.id,
        "Lambda": spec.Lambda,
        "Lambda2": spec.Lambda2,
        "N": spec.N,
        "evaluated_as": target.id,
        "evaluated_Lambda": target.Lambda,
        "phenomenological": spec.phenomenological,
    }


def _unnormalized(spec: DistributionSpec, x):
    spec = resolve(spec)
    return CATALOG[spec.id].density(x, spec)


def _quad(f, a, b, points=None):
    val, _ = integrate.quad(f, a, b, points=points, epsabs=0.0, epsrel=1e-12, limit=500)
    return val


def _total_mass(spec: DistributionSpec) -> float:
    """Integral of the unnormalized density over its support, by quadrature."""
    entry = CATALOG[spec.id]
    if not entry.joint:
        lo, hi = entry.support
        f = lambda x: float(entry.density(x, spec))  # noqa: E731
        return _quad(f, lo, hi, points=[0.5 * (lo + hi)])
    if spec.id == "F-joint-rR":
        f = lambda R, r: float(entry.density((r, R), spec))  # noqa: E731
        return _quad(lambda r: _quad(lambda R: f(R, r), 0.0, 1.0, points=sorted({r, 1 - r})), 0.0, 1.0, [0.5])
    # joint (r, R, C): integrate the density over the C window, then R, then r
    def over_C(r, R):
        lo, hi = window_bounds(r, R)
        if hi <= lo:
            return 0.0
        mid = 0.5 * (lo + hi)
        return float(entry.density((r, R, mid), spec)) * float(hi - lo)

    return _quad(lambda r: _quad(lambda R: over_C(r, R), 0.0, 1.0, points=sorted({r, 1 - r})), 0.0, 1.0, [0.5])


@lru_cache(maxsize=None)
def _constant(spec: DistributionSpec) -> float:
    total = _total_mass(spec)
    if not np.isfinite(total) or total <= 0:
        raise ArithmeticError(f"normalization integral of {spec.id} is not finite and positive: {total}")
    return 1.0 / total


def normalization_constant(spec: DistributionSpec) -> float:
    """Factor that turns the stored closed form into a normalized density."""
    return _constant(resolve(spec))


def pdf(spec: DistributionSpec, x):
    """Normalized density; zero outside the support.

    For joint entries ``x`` is a tuple ``(r, R, C)`` or ``(r, R)``.
    """
    target = resolve(spec)
    entry = CATALOG[target.id]
    c = _constant(target)
    if entry.joint:
        pts = tuple(np.asarray(v, dtype=float) for v in x)
        inside = np.ones(np.broadcast(*pts).shape, dtype=bool)
        for v in pts[:2]:
            inside &= (v >= 0) & (v <= 1)
        val = np.where(inside, c * entry.density(pts, target), 0.0)
        return float(val) if val.ndim == 0 else val
    x = np.asarray(x, dtype=float)
    lo, hi = entry.support
    inside = (x >= lo) & (x <= hi)
    xc = np.clip(x, lo, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(inside, c * entry.density(xc, target), 0.0)
    # closed forms cancel to roughly -1e-16 where they vanish at an endpoint
    val = np.maximum(val, 0.0)
    return float(val) if val.ndim == 0 else val


# -- cumulative distributions -----------------------------------------------------------

_GL_LO = np.polynomial.legendre.leggauss(10)
_GL_HI = np.polynomial.legendre.leggauss(20)


def _panel_integrals(f, knots):
    """Integral of ``f`` over each knot interval.

    Gauss-Legendre rules of two orders are compared on every interval; where
    they disagree the interval is redone with adaptive quadrature.
    """
    a, b = knots[:-1], knots[1:]
    half, mid = 0.5 * (b - a), 0.5 * (a + b)

    def gl(rule):
        x, w = rule
        pts = mid[:, None] + half[:, None] * x[None, :]
        return half * (f(pts) * w[None, :]).sum(axis=1)

    lo, hi = gl(_GL_LO), gl(_GL_HI)
    out = hi.copy()
    bad = np.abs(hi - lo) > 1e-14 * max(1.0, float(np.abs(hi).max()))
    for i in np.flatnonzero(bad):
        out[i] = _quad(lambda t: float(f(np.array(t))), a[i], b[i])
    return out


class _CdfTable(NamedTuple):
    knots: np.ndarray
    values: np.ndarray
    interp: PchipInterpolator


@lru_cache(maxsize=None)
def _cdf_table(target: DistributionSpec) -> _CdfTable:
    lo, hi = CATALOG[target.id].support
    knots = np.linspace(lo, hi, CDF_KNOTS + 1)
    c = _constant(target)

    def f(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return c * CATALOG[target.id].density(x, target)

    values = np.concatenate([[0.0], np.cumsum(_panel_integrals(f, knots))])
    return _CdfTable(knots, values, PchipInterpolator(knots, values))


def _scalar_target(spec):
    target = resolve(spec)
    if CATALOG[target.id].joint:
        raise UnsupportedOperation(f"{spec.id} is a joint density; only scalar entries have a CDF")
    return target


def cdf(spec: DistributionSpec, x):
    table = _cdf_table(_scalar_target(spec))
    x = np.asarray(x, dtype=float)
    lo, hi = table.knots[0], table.knots[-1]
    val = np.where(x <= lo, 0.0, np.where(x >= hi, 1.0, table.interp(np.clip(x, lo, hi))))
    val = np.clip(val, 0.0, 1.0)
    return float(val) if val.ndim == 0 else val


def sample(spec: DistributionSpec, count: int, rng=None) -> np.ndarray:
    """Inverse-CDF samples from a scalar entry."""
    table = _cdf_table(_scalar_target(spec))
    u = as_rng(rng).random(count) * table.values[-1]
    return np.interp(u, table.values, table.knots)


def curve_table(spec: DistributionSpec, points: int = 201):
    """Grid ``x`` with ``pdf(x)`` and ``cdf(x)`` over the support, for export."""
    lo, hi = CATALOG[_scalar_target(spec).id].support
    x = np.linspace(lo, hi, points)
    return x, pdf(spec, x), cdf(spec, x)


def sample_composed_R(N: int, Lambda: float, count: int, rng=None) -> np.ndarray:
    """Samples of an unmonitored qubit's probability when one of log2(N) qubits is monitored.

    R = r t0 + (1 - r) t1, with r drawn from the monitored-qubit marginal at
    (N, Lambda) and t0, t1 independently from the same family at (N/2, 0).
    """
    if N < 4 or N & (N - 1):
        raise ValueError(f"N must be a power of two of at least 4, got {N}")
    rng = as_rng(rng)
    r = sample(DistributionSpec("M-r-1ofq", Lambda, N=N), count, rng)
    free = DistributionSpec("M-r-1ofq", 0.0, N=N // 2)
    t0 = sample(free, count, rng)
    t1 = sample(free, count, rng)
    return r * t0 + (1 - r) * t1

"""Discrete measure spaces and the elementary objects of rearrangement theory.

A nonnegative integrable function is stored as a finite list of atoms
``(position, weight, value)`` laid out on a shared :class:`Carrier`.  All
measure computations on such functions are finite sums, so distribution
functions, pseudo-inverses and level-set measures are exact step profiles::

    carrier = Carrier.rectangle_grid(1.0, 2.0, 1, 4)
    f = AtomicFunction(carrier, [1.0, 3.0, 0.0, 2.0])
    mu = mu_of(f)          # 1.5 on [0,1), 1.0 on [1,2), 0.5 on [2,3), 0 after
    sharp = sharp_of(mu)   # 3 on [0,.5), 2 on [.5,1), 1 on [1,1.5), 0 after
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class MeasureError(RuntimeError):
    pass


class CarrierMismatchError(MeasureError):
    pass


class DomainKind(str, Enum):
    DISC = "disc"
    RECTANGLE = "rectangle"
    BALL = "ball"
    PHASE_SPACE_RADIAL = "phase_space_radial"


def unit_ball_volume(d: int) -> float:
    """Lebesgue measure K_d of the unit ball of R^d."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class Domain:
    kind: DomainKind
    total_measure: float
    radius: Optional[float] = None
    L1: Optional[float] = None
    L2: Optional[float] = None
    dim: int = 2
    r_max: Optional[float] = None
    v_max: Optional[float] = None
    truncated: bool = False

    @staticmethod
    def disc(radius: float, *, truncated: bool = False) -> "Domain":
        if not radius > 0:
            raise MeasureError(f"Disc radius must be positive, got {radius}")
        return Domain(DomainKind.DISC, math.pi * radius**2, radius=float(radius), truncated=truncated)

    @staticmethod
    def rectangle(L1: float, L2: float, *, truncated: bool = False) -> "Domain":
        if not (L1 > 0 and L2 > 0):
            raise MeasureError(f"Rectangle sides must be positive, got L1={L1}, L2={L2}")
        return Domain(DomainKind.RECTANGLE, float(L1) * float(L2), L1=float(L1), L2=float(L2), truncated=truncated)

    @staticmethod
    def ball(radius: float, dim: int) -> "Domain":
        """R^dim truncated at ``radius``."""
        if not radius > 0 or dim < 1:
            raise MeasureError(f"Ball needs radius > 0 and dim >= 1, got {radius}, {dim}")
        return Domain(
            DomainKind.BALL, unit_ball_volume(dim) * radius**dim, radius=float(radius), dim=int(dim), truncated=True
        )

    @staticmethod
    def phase_space(r_max: float, v_max: float) -> "Domain":
        if not (r_max > 0 and v_max > 0):
            raise MeasureError(f"Phase-space cutoffs must be positive, got r_max={r_max}, v_max={v_max}")
        shell = 4.0 * math.pi / 3.0
        return Domain(
            DomainKind.PHASE_SPACE_RADIAL,
            shell * r_max**3 * shell * v_max**3,
            r_max=float(r_max),
            v_max=float(v_max),
            truncated=True,
        )

    @property
    def coordinate_names(self) -> Tuple[str, ...]:
        if self.kind is DomainKind.PHASE_SPACE_RADIAL:
            return ("x1", "v1")
        if self.kind is DomainKind.BALL:
            return tuple(f"x{i + 1}" for i in range(self.dim))
        return ("x1", "x2")

    def to_dict(self) -> Dict[str, object]:
        payload: Dict[str, object] = {"kind": self.kind.value, "total_measure": self.total_measure}
        for name in ("radius", "L1", "L2", "r_max", "v_max"):
            value = getattr(self, name)
            if value is not None:
                payload[name] = value
        payload["dim"] = self.dim
        payload["truncated"] = self.truncated
        return payload


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Carrier:
    """Immutable atom layout ``(positions, weights)`` over a domain."""

    domain: Domain
    positions: np.ndarray
    weights: np.ndarray
    shape: Optional[Tuple[int, ...]] = None
    edges: Optional[Tuple[np.ndarray, ...]] = None
    # set on refinements: atom i is a piece of parent atom parent_index[i]
    parent: Optional["Carrier"] = None
    parent_index: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        positions = _frozen(np.atleast_2d(self.positions) if len(self.positions) else np.zeros((0, 2)))
        weights = _frozen(np.ravel(self.weights))
        if positions.shape[0] != weights.shape[0]:
            raise MeasureError(f"{positions.shape[0]} positions for {weights.shape[0]} weights")
        if weights.size and not np.all(weights > 0):
            raise MeasureError("Atom weights must be strictly positive")
        total = float(weights.sum())
        if total > self.domain.total_measure * (1.0 + 1e-12) + 1e-300:
            raise MeasureError(f"Atoms carry measure {total} above the domain measure {self.domain.total_measure}")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "weights", weights)
        if (self.parent is None) != (self.parent_index is None):
            raise MeasureError("A refined carrier needs both its parent and the parent index")
        if self.parent_index is not None:
            index = np.array(np.ravel(self.parent_index), dtype=np.intp, copy=True)
            index.setflags(write=False)
            if index.shape != weights.shape or (index.size and (index.min() < 0 or index.max() >= self.parent.size)):
                raise MeasureError("Parent index does not map onto the parent carrier")
            object.__setattr__(self, "parent_index", index)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def matches(self, other: "Carrier") -> bool:
        if self is other:
            return True
        return (
            self.domain == other.domain
            and self.positions.shape == other.positions.shape
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.positions, other.positions)
        )

    def pull_back(self, field: np.ndarray) -> np.ndarray:
        """A per-atom field of the parent carrier, read on this carrier."""
        field = np.asarray(field, dtype=float)
        return field if self.parent_index is None else field[self.parent_index]

    def radii(self) -> np.ndarray:
        if self.domain.kind is DomainKind.PHASE_SPACE_RADIAL:
            return self.positions[:, 0]
        return np.sqrt(np.sum(self.positions**2, axis=1))

    def speeds(self) -> np.ndarray:
        if self.domain.kind is not DomainKind.PHASE_SPACE_RADIAL:
            raise MeasureError("Speeds only exist on phase-space carriers")
        return self.positions[:, 1]

    @staticmethod
    def rectangle_grid(L1: float, L2: float, N1: int, N2: int, *, truncated: bool = False) -> "Carrier":
        """Cell-centred grid; atoms are row-major with x2 as the slow index."""
        if N1 < 1 or N2 < 1:
            raise MeasureError(f"Grid needs at least one cell per side, got {N1}x{N2}")
        domain = Domain.rectangle(L1, L2, truncated=truncated)
        x1 = (np.arange(N1) + 0.5) * (L1 / N1)
        x2 = (np.arange(N2) + 0.5) * (L2 / N2)
        X2, X1 = np.meshgrid(x2, x1, indexing="ij")
        positions = np.column_stack([X1.ravel(), X2.ravel()])
        weights = np.full(N1 * N2, (L1 / N1) * (L2 / N2))
        return Carrier(domain, positions, weights, shape=(N2, N1))

    @staticmethod
    def disc_spiral(radius: float, n_atoms: int, *, truncated: bool = False) -> "Carrier":
        """Equal-area atoms, one per ring, on a golden-angle spiral.

        Atom ``i`` sits at the mid-area radius of the ``i``-th equal-area ring,
        so ``|x|**2`` takes ``n_atoms`` distinct, equally spaced values.
        """
        if n_atoms < 1:
            raise MeasureError("Disc carrier needs at least one atom")
        domain = Domain.disc(radius, truncated=truncated)
        index = np.arange(n_atoms)
        r = radius * np.sqrt((index + 0.5) / n_atoms)
        theta = index * GOLDEN_ANGLE
        positions = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        weights = np.full(n_atoms, domain.total_measure / n_atoms)
        return Carrier(domain, positions, weights, shape=(n_atoms,))

    @staticmethod
    def ball_shells(radius: float, n_atoms: int, dim: int) -> "Carrier":
        """Equal-measure radial shells of truncated R^dim, one atom per shell on the first axis."""
        domain = Domain.ball(radius, dim)
        index = np.arange(n_atoms)
        r = radius * ((index + 0.5) / n_atoms) ** (1.0 / dim)
        positions = np.zeros((n_atoms, dim))
        positions[:, 0] = r
        weights = np.full(n_atoms, domain.total_measure / n_atoms)
        return Carrier(domain, positions, weights, shape=(n_atoms,))

    @staticmethod
    def phase_space_shells(r_max: float, v_max: float, n_r: int, n_v: int) -> "Carrier":
        """Product of equal-volume shells in |x| and |v|.

        Every cell has the exact measure ``(4pi/3)**2 * d(r**3) * d(v**3)``,
        which is the same for all cells.  Atoms sit at mid-volume radii.
        """
        if n_r < 1 or n_v < 1:
            raise MeasureError(f"Phase-space carrier needs n_r, n_v >= 1, got {n_r}, {n_v}")
        domain = Domain.phase_space(r_max, v_max)
        r_edges = r_max * (np.arange(n_r + 1) / n_r) ** (1.0 / 3.0)
        v_edges = v_max * (np.arange(n_v + 1) / n_v) ** (1.0 / 3.0)
        r_mid = r_max * ((np.arange(n_r) + 0.5) / n_r) ** (1.0 / 3.0)
        v_mid = v_max * ((np.arange(n_v) + 0.5) / n_v) ** (1.0 / 3.0)
        R, V = np.meshgrid(r_mid, v_mid, indexing="ij")
        positions = np.column_stack([R.ravel(), V.ravel()])
        weights = np.full(n_r * n_v, domain.total_measure / (n_r * n_v))
        return Carrier(domain, positions, weights, shape=(n_r, n_v), edges=(_frozen(r_edges), _frozen(v_edges)))

    @staticmethod
    def from_arrays(domain: Domain, positions: Sequence[Sequence[float]], weights: Sequence[float]) -> "Carrier":
        return Carrier(domain, np.asarray(positions, dtype=float), np.asarray(weights, dtype=float))


@dataclass(frozen=True, eq=False)
class AtomicFunction:
    carrier: Carrier
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(np.ravel(np.asarray(self.values, dtype=float)))
        if values.shape[0] != self.carrier.size:
            raise MeasureError(f"{values.shape[0]} values for a carrier of {self.carrier.size} atoms")
        if values.size and not np.all(np.isfinite(values)):
            raise MeasureError("Atom values must be finite")
        if values.size and values.min() < 0:
            raise MeasureError(f"Atom values must be nonnegative, found {values.min()}")
        object.__setattr__(self, "values", values)

    @property
    def domain(self) -> Domain:
        return self.carrier.domain

    @property
    def weights(self) -> np.ndarray:
        return self.carrier.weights

    @property
    def positions(self) -> np.ndarray:
        return self.carrier.positions

    @staticmethod
    def zeros(carrier: Carrier) -> "AtomicFunction":
        return AtomicFunction(carrier, np.zeros(carrier.size))

    def with_values(self, values: Sequence[float]) -> "AtomicFunction":
        return AtomicFunction(self.carrier, np.asarray(values, dtype=float))

    def split_onto(self, refined: Carrier) -> "AtomicFunction":
        """The same function on a refinement of its carrier."""
        if refined.matches(self.carrier):
            return self
        if refined.parent is None or not refined.parent.matches(self.carrier):
            raise CarrierMismatchError("Carrier is not a refinement of this function's carrier")
        return AtomicFunction(refined, self.values[refined.parent_index])

    def co_atomic(self, other: "AtomicFunction") -> bool:
        return self.carrier.matches(other.carrier)

    def require_co_atomic(self, *others: "AtomicFunction") -> None:
        for other in others:
            if not self.co_atomic(other):
                raise CarrierMismatchError("Binary operations need co-atomic functions")

    def integral(self) -> float:
        return float(np.dot(self.weights, self.values))

    def integrate_against(self, field: np.ndarray) -> float:
        """Atom sum of ``field * value * weight``."""
        return float(np.dot(self.weights * np.asarray(field, dtype=float), self.values))

    def l1_distance(self, other: "AtomicFunction") -> float:
        self.require_co_atomic(other)
        return float(np.dot(self.weights, np.abs(self.values - other.values)))

    def max_value(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0


class Monotonicity(str, Enum):
    NONINCREASING = "nonincreasing"
    NONDECREASING = "nondecreasing"
    NONE = "none"


class Side(str, Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True, eq=False)
class StepProfile:
    """Piecewise-constant function of one real variable.

    ``values[0]`` is the left tail, ``values[i]`` the plateau between
    ``breakpoints[i-1]`` and ``breakpoints[i]``, ``values[-1]`` the right tail.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    monotonicity: Monotonicity = Monotonicity.NONE
    side: Side = Side.RIGHT

    def __post_init__(self) -> None:
        breakpoints = _frozen(np.ravel(self.breakpoints))
        values = _frozen(np.ravel(self.values))
        if values.shape[0] != breakpoints.shape[0] + 1:
            raise MeasureError(f"{breakpoints.shape[0]} breakpoints need {breakpoints.shape[0] + 1} values")
        if breakpoints.size > 1 and not np.all(np.diff(breakpoints) > 0):
            raise MeasureError("Breakpoints must be strictly increasing")
        steps = np.diff(values)
        if self.monotonicity is Monotonicity.NONINCREASING and np.any(steps > 0):
            raise MeasureError("Plateaus violate the declared nonincreasing monotonicity")
        if self.monotonicity is Monotonicity.NONDECREASING and np.any(steps < 0):
            raise MeasureError("Plateaus violate the declared nondecreasing monotonicity")
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)

    @staticmethod
    def constant(value: float, monotonicity: Monotonicity = Monotonicity.NONE) -> "StepProfile":
        return StepProfile(np.zeros(0), np.array([float(value)]), monotonicity)

    def __call__(self, t):
        index = np.searchsorted(self.breakpoints, t, side="right" if self.side is Side.RIGHT else "left")
        result = self.values[index]
        return float(result) if np.ndim(result) == 0 else result

    @property
    def right_tail(self) -> float:
        return float(self.values[-1])

    def same_as(self, other: "StepProfile") -> bool:
        return (
            np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
            and self.monotonicity is other.monotonicity
            and self.side is other.side
        )

    def integral(self, lo: float, hi: float) -> float:
        """Exact integral over ``[lo, hi]``."""
        if hi < lo:
            return -self.integral(hi, lo)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise MeasureError("StepProfile integrals are over finite intervals")
        inner = self.breakpoints[(self.breakpoints > lo) & (self.breakpoints < hi)]
        grid = np.concatenate([[lo], inner, [hi]])
        mids = 0.5 * (grid[:-1] + grid[1:])
        return float(np.dot(np.diff(grid), self(mids))) if grid.size > 1 else 0.0


def _merged_grid(profiles: Sequence[StepProfile], lo: float) -> np.ndarray:
    points = [np.array([lo])] + [p.breakpoints[p.breakpoints > lo] for p in profiles]
    return np.unique(np.concatenate(points))


def integrate_profiles(fn: Callable[..., np.ndarray], *profiles: StepProfile, lo: float = 0.0) -> float:
    """Exact integral over ``[lo, inf)`` of ``fn(p1(t), p2(t), ...)``.

    The integrand is constant between merged breakpoints; it must vanish
    beyond the last one.
    """
    grid = _merged_grid(profiles, lo)
    beyond = grid[-1] + 1.0
    tail = np.asarray(fn(*[np.atleast_1d(p(beyond)) for p in profiles]), dtype=float)
    if np.any(np.abs(tail) > 0):
        raise MeasureError("Integrand does not vanish beyond the last breakpoint")
    if grid.size < 2:
        return 0.0
    mids = 0.5 * (grid[:-1] + grid[1:])
    integrand = np.asarray(fn(*[p(mids) for p in profiles]), dtype=float)
    return float(np.dot(np.diff(grid), integrand))


def combine_profiles(
    fn: Callable[..., np.ndarray],
    *profiles: StepProfile,
    monotonicity: Monotonicity = Monotonicity.NONE,
) -> StepProfile:
    """Right-continuous profile of ``fn`` applied plateau-wise to right-continuous profiles."""
    grid = np.unique(np.concatenate([p.breakpoints for p in profiles])) if profiles else np.zeros(0)
    if grid.size:
        sample_at = np.concatenate([[grid[0] - 1.0], grid])
    else:
        sample_at = np.array([0.0])
    values = np.asarray(fn(*[p(sample_at) for p in profiles]), dtype=float)
    return StepProfile(grid, values, monotonicity)


def mu_of(f: AtomicFunction) -> StepProfile:
    """Distribution function ``t -> meas{f > t}`` (nonincreasing, right-continuous).

    Weights are accumulated in a canonical order of the (value, weight)
    multiset, so equimeasurable functions give identical profiles.
    """
    values = f.values
    if values.size == 0:
        return StepProfile(np.zeros(0), np.zeros(1), Monotonicity.NONINCREASING)
    order = np.lexsort((f.weights, -values))
    descending = values[order]
    cumulative = np.cumsum(f.weights[order])
    last_of_group = np.flatnonzero(np.append(descending[1:] != descending[:-1], True))
    group_values = descending[last_of_group]
    group_cumulative = cumulative[last_of_group]
    breakpoints = group_values[::-1]
    plateaus = np.concatenate([[group_cumulative[-1]], group_cumulative[-2::-1], [0.0]])
    return StepProfile(breakpoints, plateaus, Monotonicity.NONINCREASING)


def sharp_of(mu: StepProfile) -> StepProfile:
    """Pseudo-inverse ``s -> inf{t >= 0 : mu(t) <= s}``."""
    if mu.monotonicity is not Monotonicity.NONINCREASING or mu.side is not Side.RIGHT:
        raise MeasureError("sharp_of needs a nonincreasing right-continuous distribution function")
    if mu.right_tail > 0:
        raise MeasureError("Distribution function does not vanish at infinity")
    starts = np.concatenate([[0.0], mu.breakpoints[mu.breakpoints > 0]])
    levels_at_start = np.atleast_1d(mu(starts))
    levels = np.unique(levels_at_start)
    first = np.searchsorted(-levels_at_start, -levels, side="left")
    plateaus = starts[first]
    return StepProfile(levels, np.concatenate([[plateaus[0]], plateaus]), Monotonicity.NONINCREASING)


def beta_of(f: AtomicFunction, g: AtomicFunction) -> StepProfile:
    """``s -> meas{f <= s < g}`` with breakpoints at atom values."""
    f.require_co_atomic(g)
    active = f.values < g.values
    lower = f.values[active]
    upper = g.values[active]
    weights = f.weights[active]
    if lower.size == 0:
        return StepProfile(np.zeros(0), np.zeros(1))
    breakpoints = np.unique(np.concatenate([lower, upper]))
    lower_order = np.argsort(lower, kind="stable")
    upper_order = np.argsort(upper, kind="stable")
    entered = np.concatenate([[0.0], np.cumsum(weights[lower_order])])
    left = np.concatenate([[0.0], np.cumsum(weights[upper_order])])
    sample_at = breakpoints
    inside = entered[np.searchsorted(lower[lower_order], sample_at, side="right")]
    outside = left[np.searchsorted(upper[upper_order], sample_at, side="right")]
    plateaus = np.maximum(inside - outside, 0.0)
    # every interval has closed by the largest upper value
    plateaus[-1] = 0.0
    return StepProfile(breakpoints, np.concatenate([[0.0], plateaus]))


def lp_norm(f: AtomicFunction, p: float) -> float:
    if p < 1:
        raise MeasureError(f"lp_norm needs p >= 1, got {p}")
    if math.isinf(p):
        return f.max_value()
    if f.values.size == 0:
        return 0.0
    return float(np.dot(f.weights, f.values**p) ** (1.0 / p))


def decreasing_profile(f: AtomicFunction) -> StepProfile:
    """``f^sharp`` as a function of measure."""
    return sharp_of(mu_of(f))


def rearranged_l1_distance(f: AtomicFunction, g: AtomicFunction) -> float:
    """``||f* - g*||_1`` computed from the two decreasing profiles."""
    return integrate_profiles(lambda a, b: np.abs(a - b), decreasing_profile(f), decreasing_profile(g))


def rearranged_product(f: AtomicFunction, g: AtomicFunction) -> float:
    """``int f* g*`` computed from the two decreasing profiles."""
    return integrate_profiles(lambda a, b: a * b, decreasing_profile(f), decreasing_profile(g))


def beta_rearranged(f: AtomicFunction, g: AtomicFunction) -> StepProfile:
    """``beta_{f*,g*}(s) = (mu_g(s) - mu_f(s))_+`` for symmetric rearrangements."""
    return combine_profiles(lambda mf, mg: np.maximum(mg - mf, 0.0), mu_of(f), mu_of(g))


def write_atoms_csv(f: AtomicFunction, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(f.domain.coordinate_names)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(names + ["weight", "value"])
        for position, weight, value in zip(f.positions, f.weights, f.values):
            writer.writerow([repr(float(x)) for x in position] + [repr(float(weight)), repr(float(value))])
    return path


def read_atoms_csv(path: Path, domain: Domain) -> AtomicFunction:
    path = Path(path)
    if not path.exists():
        raise MeasureError(f"Atom file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        rows: List[List[float]] = [[float(cell) for cell in row] for row in reader if row]
    expected = list(domain.coordinate_names) + ["weight", "value"]
    if header != expected:
        raise MeasureError(f"{path}: expected header {expected}, found {header}")
    table = np.array(rows, dtype=float).reshape(-1, len(expected))
    carrier = Carrier(domain, table[:, :-2], table[:, -2])
    return AtomicFunction(carrier, table[:, -1])


__all__ = [
    "AtomicFunction",
    "Carrier",
    "CarrierMismatchError",
    "Domain",
    "DomainKind",
    "MeasureError",
    "Monotonicity",
    "Side",
    "StepProfile",
    "beta_of",
    "beta_rearranged",
    "combine_profiles",
    "decreasing_profile",
    "integrate_profiles",
    "lp_norm",
    "mu_of",
    "read_atoms_csv",
    "rearranged_l1_distance",
    "rearranged_product",
    "sharp_of",
    "unit_ball_volume",
    "write_atoms_csv",
]

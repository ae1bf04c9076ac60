"""Sigma fields, their Jacobians ``a_sigma``/``b_sigma`` and the sigma-rearrangement.

A sigma field assigns every atom of a carrier a real "generalized radius".
Closed-form families (|x|^m, x2, |x|^2, micro-energy) also carry analytic
``a``, ``b`` and ``B`` functions that continue past the measure of the
domain; empirical fields build them from the atom multiset.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from config import TIE_MASS_REL
from rearrangement.measure_core import (
    AtomicFunction,
    Carrier,
    CarrierMismatchError,
    DomainKind,
    Monotonicity,
    Side,
    StepProfile,
    unit_ball_volume,
)

logger = logging.getLogger(__name__)


class SigmaFieldError(RuntimeError):
    pass


class SigmaKind(str, Enum):
    POWER_LAW = "power_law"
    COORD_X2 = "coord_x2"
    RADIUS_SQUARED = "radius_squared"
    MICRO_ENERGY = "micro_energy"
    STREAM_FUNCTION = "stream_function"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class AnalyticJacobian:
    """Closed-form ``a``, ``b``, ``B`` (and optionally ``H``) of a sigma family."""

    a: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    B: Callable[[np.ndarray], np.ndarray]
    e_min: float
    e_max: float
    label: str
    H: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class SigmaSpec:
    kind: SigmaKind
    m: Optional[float] = None
    d: Optional[int] = None
    values: Optional[np.ndarray] = field(default=None, compare=False)
    jacobian: Optional[AnalyticJacobian] = field(default=None, compare=False)

    @staticmethod
    def power_law(m: float, d: int = 2) -> "SigmaSpec":
        return SigmaSpec(SigmaKind.POWER_LAW, m=float(m), d=int(d))

    @staticmethod
    def coord_x2() -> "SigmaSpec":
        return SigmaSpec(SigmaKind.COORD_X2)

    @staticmethod
    def radius_squared() -> "SigmaSpec":
        return SigmaSpec(SigmaKind.RADIUS_SQUARED)

    @staticmethod
    def empirical(values: np.ndarray) -> "SigmaSpec":
        return SigmaSpec(SigmaKind.EMPIRICAL, values=np.asarray(values, dtype=float))

    @staticmethod
    def stream_function(psi0: np.ndarray) -> "SigmaSpec":
        return SigmaSpec(SigmaKind.STREAM_FUNCTION, values=np.asarray(psi0, dtype=float))

    @staticmethod
    def micro_energy(values: np.ndarray, jacobian: AnalyticJacobian) -> "SigmaSpec":
        return SigmaSpec(SigmaKind.MICRO_ENERGY, values=np.asarray(values, dtype=float), jacobian=jacobian)


@dataclass(frozen=True, eq=False)
class SigmaField:
    spec: SigmaSpec
    carrier: Carrier
    values: np.ndarray
    e_min: float
    e_max: float
    order: np.ndarray
    tie_mass: float
    a_curve: Optional[StepProfile] = None
    b_curve: Optional[StepProfile] = None
    analytic: Optional[AnalyticJacobian] = None

    @property
    def kind(self) -> SigmaKind:
        return self.spec.kind

    @property
    def is_analytic(self) -> bool:
        return self.analytic is not None

    @property
    def measure(self) -> float:
        return self.carrier.measure

    def a(self, e):
        if self.analytic is not None:
            return self.analytic.a(e)
        return self.a_curve(e)

    def b(self, mu):
        """``b_sigma``; past the domain measure analytic kinds keep their closed form
        and empirical kinds keep their last value."""
        if self.analytic is not None:
            return self.analytic.b(mu)
        return self.b_curve(mu)

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def power_law_jacobian(m: float, d: int, radius: float) -> AnalyticJacobian:
    """a = K_d s^(d/m), b = (s/K_d)^(m/d) and the matching B, H."""
    if not (0 < m <= d):
        raise SigmaFieldError(f"Power-law exponent must lie in (0, d], got m={m}, d={d}")
    k_d = unit_ball_volume(d)
    ratio = m / d
    scale = k_d ** (-ratio)

    def a(e):
        return k_d * np.maximum(e, 0.0) ** (1.0 / ratio)

    def b(mu):
        return scale * np.maximum(mu, 0.0) ** ratio

    def B(mu):
        return (d / (m + d)) * scale * np.maximum(mu, 0.0) ** (1.0 + ratio)

    def H(mu):
        return ratio * scale * np.asarray(mu, dtype=float) ** (ratio - 1.0)

    return AnalyticJacobian(a=a, b=b, B=B, H=H, e_min=0.0, e_max=radius**m, label=f"power_law(m={m:g},d={d})")


def _linear_jacobian(width: float, e_max: float, label: str) -> AnalyticJacobian:
    """Families with ``a(e) = width * e`` on the domain: |x|^2 on a disc, x2 on a strip."""

    def a(e):
        return width * np.clip(e, 0.0, e_max)

    def b(mu):
        return np.maximum(mu, 0.0) / width

    def B(mu):
        return np.maximum(mu, 0.0) ** 2 / (2.0 * width)

    def H(mu):
        return np.full(np.shape(mu), 1.0 / width) if np.ndim(mu) else 1.0 / width

    return AnalyticJacobian(a=a, b=b, B=B, H=H, e_min=0.0, e_max=e_max, label=label)


def _empirical_curves(values: np.ndarray, weights: np.ndarray, order: np.ndarray):
    """``a(e) = meas{sigma < e}`` (left-continuous) and its pseudo-inverse ``b``.

    Both are built from one cumulative array so ``a(b(C_j)) == C_j`` holds
    bit-exactly at every knot.
    """
    ascending = values[order]
    cumulative = np.cumsum(weights[order])
    last_of_group = np.flatnonzero(np.append(ascending[1:] != ascending[:-1], True))
    levels = ascending[last_of_group]
    knots = cumulative[last_of_group]
    a_curve = StepProfile(levels, np.concatenate([[0.0], knots]), Monotonicity.NONDECREASING, Side.LEFT)
    b_breaks = np.concatenate([[0.0], knots[:-1]])
    b_values = np.concatenate([[levels[0]], levels])
    b_curve = StepProfile(b_breaks, b_values, Monotonicity.NONDECREASING, Side.RIGHT)
    return a_curve, b_curve


def _tie_mass(values: np.ndarray, weights: np.ndarray, order: np.ndarray) -> float:
    ascending = values[order]
    if ascending.size < 2:
        return 0.0
    tied = np.zeros(ascending.size, dtype=bool)
    same = ascending[1:] == ascending[:-1]
    tied[1:] |= same
    tied[:-1] |= same
    return float(weights[order][tied].sum())


def sigma_values(spec: SigmaSpec, carrier: Carrier) -> np.ndarray:
    """Per-atom sigma values; analytic kinds compute them from positions."""
    kind = spec.kind
    domain = carrier.domain
    if kind is SigmaKind.RADIUS_SQUARED:
        if domain.kind is not DomainKind.DISC:
            raise SigmaFieldError("RadiusSquared needs a disc domain")
        return np.sum(carrier.positions**2, axis=1)
    if kind is SigmaKind.COORD_X2:
        if domain.kind is not DomainKind.RECTANGLE:
            raise SigmaFieldError("CoordX2 needs a rectangle domain")
        return carrier.positions[:, 1].copy()
    if kind is SigmaKind.POWER_LAW:
        if domain.kind is DomainKind.DISC:
            dim = 2
        elif domain.kind is DomainKind.BALL:
            dim = domain.dim
        else:
            raise SigmaFieldError(f"PowerLaw needs a disc or truncated R^d, got {domain.kind.value}")
        if spec.d != dim:
            raise SigmaFieldError(f"PowerLaw dimension d={spec.d} does not match the domain dimension {dim}")
        return carrier.radii() ** spec.m
    if spec.values is None:
        raise SigmaFieldError(f"{kind.value} fields need one value per atom")
    values = np.array(np.ravel(spec.values), dtype=float)
    if values.shape[0] != carrier.size:
        raise SigmaFieldError(f"{values.shape[0]} sigma values for {carrier.size} atoms")
    if not np.all(np.isfinite(values)):
        raise SigmaFieldError("Sigma values must be finite")
    if kind is SigmaKind.MICRO_ENERGY and domain.kind is not DomainKind.PHASE_SPACE_RADIAL:
        raise SigmaFieldError("MicroEnergy needs a phase-space domain")
    if kind is SigmaKind.STREAM_FUNCTION and domain.kind not in (DomainKind.DISC, DomainKind.RECTANGLE):
        raise SigmaFieldError("StreamFunction needs a disc or rectangle domain")
    return values


def build_sigma_field(spec: SigmaSpec, carrier: Carrier) -> SigmaField:
    if carrier.size == 0:
        raise SigmaFieldError("Cannot build a sigma field on a carrier without atoms")
    values = sigma_values(spec, carrier)
    values.setflags(write=False)
    order = np.argsort(values, kind="stable")
    weights = carrier.weights
    tie_mass = _tie_mass(values, weights, order)
    if tie_mass > TIE_MASS_REL * carrier.measure:
        logger.info(
            "%s field: atoms sharing a sigma value carry measure %.3e (%.2e of total)",
            spec.kind.value,
            tie_mass,
            tie_mass / carrier.measure,
        )

    domain = carrier.domain
    analytic: Optional[AnalyticJacobian] = None
    if spec.kind is SigmaKind.RADIUS_SQUARED:
        analytic = _linear_jacobian(math.pi, domain.radius**2, "radius_squared")
    elif spec.kind is SigmaKind.COORD_X2:
        analytic = _linear_jacobian(domain.L1, domain.L2, "coord_x2")
    elif spec.kind is SigmaKind.POWER_LAW:
        analytic = power_law_jacobian(spec.m, spec.d, domain.radius)
    elif spec.kind is SigmaKind.MICRO_ENERGY:
        if spec.jacobian is None:
            raise SigmaFieldError("MicroEnergy fields need the radial-integral Jacobian")
        analytic = spec.jacobian

    a_curve, b_curve = _empirical_curves(values, weights, order)
    if analytic is not None:
        e_min, e_max = analytic.e_min, analytic.e_max
    else:
        e_min, e_max = float(values[order[0]]), float(values[order[-1]])
    return SigmaField(
        spec=spec,
        carrier=carrier,
        values=values,
        e_min=e_min,
        e_max=e_max,
        order=order,
        tie_mass=tie_mass,
        a_curve=a_curve,
        b_curve=b_curve,
        analytic=analytic,
    )


def stream_function_field(psi0: np.ndarray, carrier: Carrier) -> SigmaField:
    return build_sigma_field(SigmaSpec.stream_function(psi0), carrier)


def microenergy_field(e0: np.ndarray, jacobian: AnalyticJacobian, carrier: Carrier) -> SigmaField:
    return build_sigma_field(SigmaSpec.micro_energy(e0, jacobian), carrier)


def sigma_rearrange(f: AtomicFunction, sigma: SigmaField) -> AtomicFunction:
    """Stack the values of ``f`` in decreasing order onto atoms of increasing sigma.

    When the two weight streams differ, atoms are split at the union of their
    cumulative boundaries and the result lives on a refined carrier.
    """
    if not f.carrier.matches(sigma.carrier):
        raise CarrierMismatchError("sigma_rearrange needs f on the sigma field's carrier")
    weights = f.weights
    sigma_order = sigma.order
    rank = np.empty_like(sigma_order)
    rank[sigma_order] = np.arange(sigma_order.size)
    # equal values go to atoms in sigma order so fixed points stay atom-exact
    value_order = np.lexsort((rank, -f.values))
    sigma_weights = weights[sigma_order]
    value_weights = weights[value_order]
    if np.array_equal(sigma_weights, value_weights):
        out = np.empty_like(f.values)
        out[sigma_order] = f.values[value_order]
        return f.with_values(out)

    sigma_edges = np.cumsum(sigma_weights)
    value_edges = np.cumsum(value_weights)
    edges = np.unique(np.concatenate([[0.0], sigma_edges, value_edges]))
    pieces = np.diff(edges)
    keep = pieces > 1e-15 * sigma_edges[-1]
    mids = (0.5 * (edges[:-1] + edges[1:]))[keep]
    pieces = pieces[keep]
    top = sigma_order.size - 1
    target = sigma_order[np.minimum(np.searchsorted(sigma_edges, mids, side="right"), top)]
    source = value_order[np.minimum(np.searchsorted(value_edges, mids, side="right"), top)]
    logger.debug("sigma_rearrange split %d atoms into %d pieces", sigma_order.size, pieces.size)
    refined = Carrier(f.carrier.domain, f.positions[target], pieces, parent=f.carrier, parent_index=target)
    return AtomicFunction(refined, f.values[source])


def schwarz_rearrange(f: AtomicFunction) -> AtomicFunction:
    """Symmetric decreasing rearrangement, i.e. the |x| case."""
    domain = f.domain
    if domain.kind is DomainKind.DISC:
        dim = 2
    elif domain.kind is DomainKind.BALL:
        dim = domain.dim
    else:
        raise SigmaFieldError(f"Schwarz rearrangement is not defined on a {domain.kind.value} domain")
    return sigma_rearrange(f, build_sigma_field(SigmaSpec.power_law(1.0, dim), f.carrier))


def lemma21_report(sigma: SigmaField, *, max_pairs: int = 256) -> Dict[str, object]:
    """Identity checks on the discrete Jacobian of ``sigma``.

    Reports the largest jump of ``a`` against the largest atom weight, whether
    ``a(b(mu)) == mu`` at every knot, the ``a(e) <= mu <=> e <= b(mu)``
    equivalence on sampled knot pairs, and the tied measure.
    """
    a_curve = sigma.a_curve
    b_curve = sigma.b_curve
    levels = a_curve.breakpoints
    knots = b_curve.breakpoints
    jumps = np.diff(a_curve.values)
    inverse = np.asarray(a_curve(b_curve(knots)))
    inverse_exact = bool(np.array_equal(inverse, knots))

    pick_levels = levels[np.unique(np.linspace(0, levels.size - 1, min(max_pairs, levels.size)).astype(int))]
    pick_knots = knots[np.unique(np.linspace(0, knots.size - 1, min(max_pairs, knots.size)).astype(int))]
    a_vals = np.asarray(a_curve(pick_levels))[:, None]
    b_vals = np.asarray(b_curve(pick_knots))[None, :]
    left = a_vals <= pick_knots[None, :]
    right = pick_levels[:, None] <= b_vals
    equivalence = bool(np.array_equal(left, right))

    report: Dict[str, object] = {
        "kind": sigma.kind.value,
        "max_jump": float(jumps.max()) if jumps.size else 0.0,
        "max_weight": float(sigma.carrier.weights.max()),
        "inverse_exact_at_knots": inverse_exact,
        "equivalence_on_knot_pairs": equivalence,
        "tie_mass": sigma.tie_mass,
    }
    if sigma.is_analytic:
        mu_grid = np.linspace(0.0, sigma.measure, 65)[1:]
        roundtrip = np.asarray(sigma.analytic.a(sigma.analytic.b(mu_grid)))
        report["analytic_inverse_rel_error"] = float(np.max(np.abs(roundtrip - mu_grid) / mu_grid))
    return report


def write_sigma_csv(sigma: SigmaField, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["atom_index", "sigma_value"])
        for index, value in enumerate(sigma.values):
            writer.writerow([index, repr(float(value))])
    return path


def read_sigma_csv(path: Path, carrier: Carrier) -> SigmaField:
    path = Path(path)
    if not path.exists():
        raise SigmaFieldError(f"Sigma file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["atom_index", "sigma_value"]:
            raise SigmaFieldError(f"{path}: expected header atom_index,sigma_value, found {header}")
        rows = [(int(row[0]), float(row[1])) for row in reader if row]
    values = np.empty(len(rows))
    for index, value in rows:
        values[index] = value
    return build_sigma_field(SigmaSpec.empirical(values), carrier)


__all__ = [
    "AnalyticJacobian",
    "SigmaField",
    "SigmaFieldError",
    "SigmaKind",
    "SigmaSpec",
    "build_sigma_field",
    "lemma21_report",
    "microenergy_field",
    "power_law_jacobian",
    "read_sigma_csv",
    "schwarz_rearrange",
    "sigma_rearrange",
    "sigma_values",
    "stream_function_field",
    "write_sigma_csv",
]

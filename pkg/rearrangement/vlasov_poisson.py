"""Radial gravitational Vlasov-Poisson steady states and their stability certificates.

Units follow ``lap phi = rho``, so a mass ``M`` has exterior potential
``-M / (4 pi r)``.  Steady states are polytropes ``f0 = kappa (e_cut - e)_+^k``
of the particle energy ``e = |v|^2/2 + phi(x)``; their density is
``c_k kappa W^(k+3/2)`` with ``W = e_cut - phi``, so the radial Poisson
equation is a Lane-Emden problem solved by shooting on the central depth.

Phase-space functions live on ``Carrier.phase_space_shells`` (equal-volume
shells in ``|x|`` and ``|v|``).  Densities are taken uniform on each radial
shell, which makes the potential, the field energy and the Hamiltonian
exact for the atomic representation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.special import beta as beta_function

from config import SHOOTING_TOL
from rearrangement.certify import Certificate, InequalityId, Sense
from rearrangement.convexity import ConvexCurve, Extension, Interpolation, KConstant, k_constant, vp_k_bound
from rearrangement.measure_core import (
    AtomicFunction,
    Carrier,
    DomainKind,
    Monotonicity,
    Side,
    StepProfile,
    lp_norm,
    rearranged_l1_distance,
)
from rearrangement.sigma_fields import (
    AnalyticJacobian,
    SigmaField,
    SigmaSpec,
    build_sigma_field,
    microenergy_field,
    sigma_rearrange,
)

logger = logging.getLogger(__name__)

PHASE_VOLUME_FACTOR = 32.0 * math.pi**2 * math.sqrt(2.0) / 3.0


class VlasovPoissonError(RuntimeError):
    pass


def polytrope_density_constant(k: float) -> float:
    """``c_k = 4 sqrt(2) pi B(k+1, 3/2)`` with ``int kappa (W - |v|^2/2)_+^k dv = c_k kappa W^(k+3/2)``."""
    return 4.0 * math.sqrt(2.0) * math.pi * float(beta_function(k + 1.0, 1.5))


def polytrope_density_quadrature(k: float) -> float:
    """The same constant from the velocity integral, as an independent check."""
    # (1 - t^2)^k = (1 - t)^k (1 + t)^k, the first factor goes into the algebraic weight
    value, _ = quad(lambda t: t**2 * (1.0 + t) ** k, 0.0, 1.0, weight="alg", wvar=(0.0, k))
    return 8.0 * math.sqrt(2.0) * math.pi * value


@dataclass(frozen=True, eq=False)
class RadialPotential:
    """``phi(r)``: ``e_cut - W(r)`` inside the support, ``-M/(4 pi r)`` outside."""

    r_grid: np.ndarray
    phi: np.ndarray
    phi_at_zero: float
    support_radius: float
    mass: float
    e_cut: float
    depth: CubicHermiteSpline = field(repr=False)

    @cached_property
    def _depth_slope(self):
        return self.depth.derivative()

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.support_radius
        safe = np.where(inside, self.support_radius, r)
        values = np.where(
            inside,
            self.e_cut - self.depth(np.minimum(r, self.support_radius)),
            -self.mass / (4.0 * math.pi * safe),
        )
        return float(values) if values.ndim == 0 else values

    def gradient(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.support_radius
        safe = np.where(inside, self.support_radius, r)
        values = np.where(
            inside,
            -self._depth_slope(np.minimum(r, self.support_radius)),
            self.mass / (4.0 * math.pi * safe**2),
        )
        return float(values) if values.ndim == 0 else values

    def depth_at(self, r):
        """``W = e_cut - phi``, clipped at zero outside the support."""
        return np.maximum(self.e_cut - np.asarray(self(r), dtype=float), 0.0)


# -- shooting ----------------------------------------------------------------------------------


@dataclass
class _Profile:
    W_c: float
    support_radius: float
    edge_slope: float
    solution: object
    r_start: float
    rate: float
    exponent: float


def _lane_emden(W_c: float, rate: float, exponent: float) -> _Profile:
    """Integrate ``W'' + 2W'/r = -rate W_+^n`` from ``W(0) = W_c`` to the first zero of ``W``."""
    scale = 1.0 / math.sqrt(rate * W_c ** (exponent - 1.0))
    r_start = 1e-6 * scale
    curvature = rate * W_c**exponent
    initial = [W_c - curvature * r_start**2 / 6.0, -curvature * r_start / 3.0]

    def rhs(r, y):
        return [y[1], -rate * max(y[0], 0.0) ** exponent - 2.0 * y[1] / r]

    def edge(r, y):
        return y[0]

    edge.terminal = True
    edge.direction = -1
    solution = solve_ivp(
        rhs,
        (r_start, 1e3 * scale),
        initial,
        method="DOP853",
        rtol=1e-11,
        atol=1e-14 * W_c,
        events=edge,
        dense_output=True,
    )
    if not solution.success or solution.t_events[0].size == 0:
        raise VlasovPoissonError(f"Radial profile with central depth {W_c} has no finite support")
    support = float(solution.t_events[0][0])
    slope = float(solution.y_events[0][0][1])
    return _Profile(W_c, support, slope, solution.sol, r_start, rate, exponent)


def _shoot(e_cut: float, rate: float, exponent: float, tol: float) -> _Profile:
    """Find ``W_c`` with ``R_s W'(R_s) = e_cut``, the exterior matching condition."""

    def mismatch(W_c: float) -> float:
        profile = _lane_emden(W_c, rate, exponent)
        return profile.support_radius * profile.edge_slope - e_cut

    lo = 1e-3 * abs(e_cut)
    hi = abs(e_cut)
    f_lo = mismatch(lo)
    f_hi = mismatch(hi)
    while f_lo * f_hi > 0 and hi < 1e3 * abs(e_cut):
        hi *= 10.0
        f_hi = mismatch(hi)
    if f_lo * f_hi > 0:
        raise VlasovPoissonError(f"Shooting could not bracket the central depth for e_cut={e_cut}")
    try:
        W_c, report = brentq(mismatch, lo, hi, rtol=max(tol, 1e-15), maxiter=200, full_output=True)
    except (RuntimeError, ValueError) as exc:
        raise VlasovPoissonError(f"Shooting did not converge: {exc}") from exc
    if not report.converged:
        raise VlasovPoissonError(f"Shooting did not converge after {report.iterations} iterations")
    logger.info("Shooting converged after %d iterations: W_c=%.12g", report.iterations, W_c)
    return _lane_emden(W_c, rate, exponent)


def _tabulate(profile: _Profile, e_cut: float, size: int) -> RadialPotential:
    support = profile.support_radius
    half = max(size // 2, 8)
    nodes = np.unique(
        np.concatenate(
            [
                np.linspace(profile.r_start, support, half),
                np.geomspace(profile.r_start, support, size - half),
            ]
        )
    )
    states = profile.solution(nodes)
    W = np.concatenate([[profile.W_c], states[0]])
    dW = np.concatenate([[0.0], states[1]])
    r = np.concatenate([[0.0], nodes])
    W[-1] = 0.0
    dW[-1] = profile.edge_slope
    mass = -4.0 * math.pi * support**2 * profile.edge_slope
    depth = CubicHermiteSpline(r, W, dW)
    return RadialPotential(
        r_grid=r,
        phi=e_cut - W,
        phi_at_zero=e_cut - profile.W_c,
        support_radius=support,
        mass=mass,
        e_cut=e_cut,
        depth=depth,
    )


def poisson_residual(potential: RadialPotential, density, *, samples: int = 400001) -> float:
    """Relative sup error between ``r^2 phi'`` and ``int_0^r s^2 rho`` over the support."""
    r = np.linspace(0.0, potential.support_radius, samples)
    enclosed = cumulative_trapezoid(r**2 * density(r), r, initial=0.0)
    model = r**2 * potential.gradient(r)
    return float(np.max(np.abs(model - enclosed)) / np.max(np.abs(enclosed)))


# -- steady state ------------------------------------------------------------------------------


def _a_e0_value(potential: RadialPotential, s: float) -> float:
    """``meas{e0 < s}`` as the radial integral ``(8 pi sqrt2 / 3) int (s + phi(0) - phi)_+^(3/2) dx``."""
    if s <= 0:
        return 0.0
    level = s + potential.phi_at_zero
    if level >= 0:
        return math.inf
    if level <= potential.e_cut:
        r_lim = brentq(lambda r: potential(r) - level, 0.0, potential.support_radius, xtol=1e-15, rtol=1e-14)
    else:
        r_lim = -potential.mass / (4.0 * math.pi * level)
    points = [potential.support_radius] if r_lim > potential.support_radius else None
    value, _ = quad(
        lambda r: r**2 * max(level - potential(r), 0.0) ** 1.5,
        0.0,
        r_lim,
        points=points,
        limit=400,
        epsabs=0.0,
        epsrel=1e-12,
    )
    return PHASE_VOLUME_FACTOR * value


def _jacobian_table(potential: RadialPotential, support_measure: float, size: int) -> Tuple[np.ndarray, np.ndarray]:
    e_max = -potential.phi_at_zero
    s_top = potential.e_cut - potential.phi_at_zero
    for _ in range(80):
        if _a_e0_value(potential, s_top) >= 2.5 * support_measure:
            break
        s_top += 0.5 * (e_max - s_top)
    else:
        raise VlasovPoissonError("a_e0 does not reach 2.5 times the support measure below -phi(0)")
    s_table = s_top * (np.arange(size + 1) / size) ** (1.0 / 3.0)
    a_table = np.array([_a_e0_value(potential, float(s)) for s in s_table])
    if not np.all(np.diff(a_table) > 0):
        raise VlasovPoissonError("a_e0 table is not strictly increasing")
    return s_table, a_table


def _microenergy_jacobian(potential: RadialPotential, s_table: np.ndarray, a_table: np.ndarray) -> AnalyticJacobian:
    increments = 0.5 * (s_table[1:] + s_table[:-1]) * np.diff(a_table)
    curve = ConvexCurve(
        knots=a_table,
        values=np.concatenate([[0.0], np.cumsum(increments)]),
        interpolation=Interpolation.QUADRATIC,
        slopes=s_table,
        extension=Extension.LINEAR,
        tail_slope=float(s_table[-1]),
    )

    def a(e):
        return np.interp(e, s_table, a_table, left=0.0)

    def b(mu):
        return np.interp(mu, a_table, s_table)

    return AnalyticJacobian(a=a, b=b, B=curve, e_min=0.0, e_max=-potential.phi_at_zero, label="micro_energy")


@dataclass(frozen=True, eq=False)
class SteadyStateVP:
    k: float
    kappa: float
    e_cut: float
    potential: RadialPotential
    f0: AtomicFunction
    e0_atoms: np.ndarray
    support_measure: float
    jacobian: AnalyticJacobian
    W_c: float
    c_k: float
    s_table: np.ndarray = field(repr=False)
    a_table: np.ndarray = field(repr=False)
    shooting_mismatch: float = 0.0
    poisson_residual: float = 0.0

    @property
    def carrier(self) -> Carrier:
        return self.f0.carrier

    def profile(self, e):
        """``F(e) = kappa (e_cut - e)_+^k`` in unshifted energy."""
        return self.kappa * np.maximum(self.e_cut - np.asarray(e, dtype=float), 0.0) ** self.k

    @cached_property
    def sigma(self) -> SigmaField:
        return microenergy_field(self.e0_atoms, self.jacobian, self.carrier)

    @cached_property
    def K(self) -> KConstant:
        return k_constant(self.f0, self.sigma)

    @cached_property
    def shell(self) -> "ShellPotential":
        return shell_potential(self.f0)

    @cached_property
    def kinetic_weights(self) -> np.ndarray:
        return _kinetic_weights(self.carrier)

    def to_dict(self) -> Dict[str, object]:
        n_r, n_v = self.carrier.shape
        return {
            "k": self.k,
            "kappa": self.kappa,
            "e0": self.e_cut,
            "phi_at_zero": self.potential.phi_at_zero,
            "support_measure": self.support_measure,
            "support_radius": self.potential.support_radius,
            "mass": self.potential.mass,
            "central_depth": self.W_c,
            "c_k": self.c_k,
            "r_grid_size": int(self.potential.r_grid.size),
            "v_grid_size": int(n_v),
            "r_shells": int(n_r),
            "r_max": self.carrier.domain.r_max,
            "v_max": self.carrier.domain.v_max,
            "poisson_residual": self.poisson_residual,
            "shooting_mismatch": self.shooting_mismatch,
        }


def build_steady_vp(
    k: float = 1.5,
    kappa: float = 1.0,
    e0: float = -1.0,
    *,
    n_r: int = 512,
    n_v: int = 512,
    r_grid_size: int = 2048,
    margin: float = 1.25,
    table_size: int = 1024,
    shooting_tol: float = SHOOTING_TOL,
) -> SteadyStateVP:
    """Polytrope ``f0 = kappa (e0 - e)_+^k`` with its self-consistent potential.

    ``e0`` is the cut-off energy; atoms carry the shifted energy
    ``|v|^2/2 + phi(r) - phi(0)``.
    """
    problems: List[str] = []
    if not k > 1:
        problems.append(f"k must exceed 1, got {k}")
    if not k + 1.5 < 5:
        problems.append(f"k + 3/2 must stay below 5 for compact support, got k={k}")
    if not kappa > 0:
        problems.append(f"kappa must be positive, got {kappa}")
    if not e0 < 0:
        problems.append(f"e0 must be negative, got {e0}")
    if not margin > 1:
        problems.append(f"margin must exceed 1, got {margin}")
    if problems:
        raise VlasovPoissonError("; ".join(problems))

    c_k = polytrope_density_constant(k)
    check = polytrope_density_quadrature(k)
    if abs(check - c_k) > 1e-8 * c_k:
        raise VlasovPoissonError(f"Velocity-integral constant mismatch: {c_k} vs {check}")
    exponent = k + 1.5
    rate = c_k * kappa
    profile = _shoot(e0, rate, exponent, shooting_tol)
    mismatch = profile.support_radius * profile.edge_slope - e0
    potential = _tabulate(profile, e0, r_grid_size)
    residual = poisson_residual(potential, lambda r: rate * potential.depth_at(r) ** exponent)
    logger.info(
        "Polytrope k=%.3g: R_s=%.6g, M=%.6g, phi(0)=%.6g, Poisson residual %.2e",
        k,
        potential.support_radius,
        potential.mass,
        potential.phi_at_zero,
        residual,
    )

    v_top = math.sqrt(2.0 * profile.W_c)
    carrier = Carrier.phase_space_shells(margin * potential.support_radius, margin * v_top, n_r, n_v)
    r_atoms = carrier.positions[:, 0]
    v_atoms = carrier.speeds()
    e0_atoms = 0.5 * v_atoms**2 + np.asarray(potential(r_atoms)) - potential.phi_at_zero
    f0_values = kappa * np.maximum(profile.W_c - e0_atoms, 0.0) ** k
    f0 = AtomicFunction(carrier, f0_values)

    support_measure = _a_e0_value(potential, profile.W_c)
    s_table, a_table = _jacobian_table(potential, support_measure, table_size)
    jacobian = _microenergy_jacobian(potential, s_table, a_table)
    return SteadyStateVP(
        k=float(k),
        kappa=float(kappa),
        e_cut=float(e0),
        potential=potential,
        f0=f0,
        e0_atoms=e0_atoms,
        support_measure=support_measure,
        jacobian=jacobian,
        W_c=profile.W_c,
        c_k=c_k,
        s_table=s_table,
        a_table=a_table,
        shooting_mismatch=float(mismatch),
        poisson_residual=residual,
    )


def a_e0(ss: SteadyStateVP, s: float) -> float:
    """``a_e0(s)`` by direct radial quadrature."""
    e_max = -ss.potential.phi_at_zero
    if not (0.0 <= s < e_max):
        raise VlasovPoissonError(f"a_e0 is defined on [0, {e_max}), got {s}")
    return _a_e0_value(ss.potential, s)


def a_e0_curve(ss: SteadyStateVP) -> StepProfile:
    """Tabulated ``a_e0`` as a left-continuous nondecreasing step profile."""
    return StepProfile(
        ss.s_table,
        np.concatenate([[0.0], ss.a_table]),
        Monotonicity.NONDECREASING,
        Side.LEFT,
    )


def a_e0_crosscheck(ss: SteadyStateVP, percentiles: Sequence[float] = (0.1, 0.5, 0.9)) -> Dict[str, object]:
    """Closed-form ``a_e0`` against the measure of atoms below each level."""
    rows = []
    for p in percentiles:
        level = float(ss.jacobian.b(p * ss.support_measure))
        analytic = _a_e0_value(ss.potential, level)
        empirical = float(np.sum(ss.carrier.weights[ss.e0_atoms < level]))
        rows.append(
            {
                "percentile": float(p),
                "level": level,
                "analytic": analytic,
                "empirical": empirical,
                "relative_error": abs(empirical - analytic) / analytic,
            }
        )
    slopes = np.diff(ss.a_table) / np.diff(ss.s_table)
    return {
        "rows": rows,
        "max_relative_error": max((row["relative_error"] for row in rows), default=0.0),
        "a_at_zero": _a_e0_value(ss.potential, 0.0),
        "increasing": bool(np.all(slopes > 0)),
        "convex": bool(np.all(np.diff(slopes) >= -1e-9 * slopes[1:])),
    }


def fixed_point_defect(ss: SteadyStateVP) -> float:
    """``||f0^{*e0} - f0||_1 / ||f0||_1``."""
    rearranged = sigma_rearrange(ss.f0, ss.sigma)
    return rearranged.l1_distance(ss.f0) / ss.f0.integral()


# -- shell-exact Poisson -----------------------------------------------------------------------


@dataclass(frozen=True)
class ShellPotential:
    """Potential of a density that is uniform on each radial shell."""

    r_edges: np.ndarray
    shell_mass: np.ndarray
    phi_edges: np.ndarray
    phi_avg: np.ndarray
    field_energy: float

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.shell_mass))

    @property
    def phi_at_zero(self) -> float:
        return float(self.phi_edges[0])

    @property
    def sup_abs(self) -> float:
        return float(max(np.max(np.abs(self.phi_edges)), np.max(np.abs(self.phi_avg))))

    def atom_values(self, n_v: int) -> np.ndarray:
        return np.repeat(self.phi_avg, n_v)


def _require_phase_space(carrier: Carrier) -> None:
    if carrier.domain.kind is not DomainKind.PHASE_SPACE_RADIAL or carrier.edges is None:
        raise VlasovPoissonError("Phase-space shell carriers are required")


def _kinetic_weights(carrier: Carrier) -> np.ndarray:
    """Shell average of ``|v|^2/2`` for every atom."""
    _require_phase_space(carrier)
    _, v_edges = carrier.edges
    n_r, _ = carrier.shape
    per_shell = 0.3 * np.diff(v_edges**5) / np.diff(v_edges**3)
    return np.tile(per_shell, n_r)


def _solve_shells(r_edges: np.ndarray, masses: np.ndarray) -> ShellPotential:
    inner = r_edges[:-1]
    outer = r_edges[1:]
    d3 = outer**3 - inner**3
    d5 = outer**5 - inner**5
    slope = masses / d3
    enclosed = np.concatenate([[0.0], np.cumsum(masses)])
    offset = enclosed[:-1] - slope * inner**3
    inv_inner = np.divide(1.0, inner, out=np.zeros_like(inner), where=inner > 0)
    total = enclosed[-1]
    r_max = r_edges[-1]

    shell_energy = offset**2 * (inv_inner - 1.0 / outer) + offset * slope * (outer**2 - inner**2) + slope**2 * d5 / 5.0
    field_energy = (float(np.sum(shell_energy)) + total**2 / r_max) / (4.0 * math.pi)

    drops = (offset * (inv_inner - 1.0 / outer) + 0.5 * slope * (outer**2 - inner**2)) / (4.0 * math.pi)
    phi_out = -total / (4.0 * math.pi * r_max)
    phi_edges = np.append(phi_out - np.cumsum(drops[::-1])[::-1], phi_out)
    phi_avg = phi_edges[1:] - (
        offset * (1.5 * (outer**2 - inner**2) / d3 - 1.0 / outer) + slope * (0.5 * outer**2 - 0.3 * d5 / d3)
    ) / (4.0 * math.pi)
    return ShellPotential(
        r_edges=r_edges,
        shell_mass=masses,
        phi_edges=phi_edges,
        phi_avg=phi_avg,
        field_energy=field_energy,
    )


def _shell_masses(carrier: Carrier, values: np.ndarray) -> np.ndarray:
    n_r, n_v = carrier.shape
    return (carrier.weights * values).reshape(n_r, n_v).sum(axis=1)


def shell_potential(f: AtomicFunction) -> ShellPotential:
    """Exact potential and ``||grad phi||^2`` of the shell-uniform density of ``f``."""
    carrier = f.carrier
    _require_phase_space(carrier)
    r_edges, _ = carrier.edges
    return _solve_shells(np.asarray(r_edges), _shell_masses(carrier, f.values))


def _difference_field_energy(f: AtomicFunction, g: AtomicFunction) -> float:
    """``||grad phi_f - grad phi_g||^2``."""
    f.require_co_atomic(g)
    r_edges, _ = f.carrier.edges
    return _solve_shells(np.asarray(r_edges), _shell_masses(f.carrier, f.values - g.values)).field_energy


def hamiltonian_vp(f: AtomicFunction) -> float:
    """``int |v|^2/2 f - (1/2) ||grad phi_f||^2``."""
    carrier = f.carrier
    _require_phase_space(carrier)
    kinetic = f.integrate_against(_kinetic_weights(carrier))
    return kinetic - 0.5 * shell_potential(f).field_energy


def continuum_hamiltonian(ss: SteadyStateVP) -> float:
    """Hamiltonian of the continuous polytrope from radial quadratures of the profile."""
    k = ss.k
    moment, _ = quad(lambda t: t**4 * (1.0 - t**2) ** k, 0.0, 1.0)
    kinetic_rate = 8.0 * math.sqrt(2.0) * math.pi * ss.kappa * moment
    potential = ss.potential
    support = potential.support_radius

    def kinetic_density(r):
        return 4.0 * math.pi * r**2 * kinetic_rate * float(potential.depth_at(r)) ** (k + 2.5)

    def field_density(r):
        return 4.0 * math.pi * r**2 * float(potential.gradient(r)) ** 2

    kinetic, _ = quad(kinetic_density, 0.0, support, limit=400, epsrel=1e-12)
    field_inside, _ = quad(field_density, 0.0, support, limit=400, epsrel=1e-12)
    field_energy = field_inside + potential.mass**2 / (4.0 * math.pi * support)
    return kinetic - 0.5 * field_energy


def vp_energy_identity(f: AtomicFunction, ss: SteadyStateVP) -> float:
    """Relative residual of ``H(f) - H(f0) = int (|v|^2/2 + phi0)(f - f0) - (1/2)||grad(phi_f - phi0)||^2``."""
    f0 = ss.f0
    f0.require_co_atomic(f)
    n_v = ss.carrier.shape[1]
    energy = ss.kinetic_weights + ss.shell.atom_values(n_v)
    difference = hamiltonian_vp(f) - hamiltonian_vp(f0)
    linear = float(np.dot(f.weights * energy, f.values - f0.values))
    rhs = linear - 0.5 * _difference_field_energy(f, f0)
    return abs(difference - rhs) / max(abs(difference), abs(rhs), 1e-300)


def j_functional(phi: ShellPotential, ss: SteadyStateVP) -> float:
    """``J(phi) = int e_phi f0^{*e_phi} + (1/2)||grad phi||^2`` with ``e_phi = |v|^2/2 + phi``."""
    carrier = ss.carrier
    energy = ss.kinetic_weights + phi.atom_values(carrier.shape[1])
    sigma = build_sigma_field(SigmaSpec.empirical(energy), carrier)
    rearranged = sigma_rearrange(ss.f0, sigma)
    return rearranged.integrate_against(energy) + 0.5 * phi.field_energy


@dataclass(frozen=True)
class InterpolationReport:
    gradient_sq: float
    kinetic_moment: float
    l1: float
    linf: float
    bound_scale: float
    ratio: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def interpolation_diag(f: AtomicFunction) -> InterpolationReport:
    """``||grad phi_f||^2`` against ``|| |v|^2 f ||_1^(1/2) ||f||_1^(7/6) ||f||_inf^(1/3)``.

    Both sides scale as ``lambda^2`` under ``f -> lambda f``.
    """
    carrier = f.carrier
    gradient_sq = shell_potential(f).field_energy
    kinetic_moment = 2.0 * f.integrate_against(_kinetic_weights(carrier))
    l1 = lp_norm(f, 1)
    linf = lp_norm(f, math.inf)
    scale = math.sqrt(kinetic_moment) * l1 ** (7.0 / 6.0) * linf ** (1.0 / 3.0)
    ratio = gradient_sq / scale if scale > 0 else math.nan
    return InterpolationReport(gradient_sq, kinetic_moment, l1, linf, scale, ratio)


# -- certificates ------------------------------------------------------------------------------


def certify_vp_global(f: AtomicFunction, ss: SteadyStateVP) -> Certificate:
    """Global control ``||f - f0|| <= ||f* - f0*|| + sqrt(K0 [dH + 2|phi0(0)| ||f* - f0*|| + ||grad dphi||^2])``."""
    f0 = ss.f0
    f0.require_co_atomic(f)
    caveats: List[str] = []
    bound = vp_k_bound(ss)
    K = ss.K
    if K.conclusive:
        K0 = min(K.value, bound)
    else:
        K0 = bound
        caveats.append("k_inconclusive_bound_used")
    if K.conclusive and K.value > bound * (1.0 + 1e-6):
        caveats.append("k_exceeds_explicit_bound")

    distance = f.l1_distance(f0)
    rearranged = rearranged_l1_distance(f, f0)
    energy = hamiltonian_vp(f) - hamiltonian_vp(f0)
    gradient = _difference_field_energy(f, f0)
    depth = abs(ss.potential.phi_at_zero)
    bracket = energy + 2.0 * depth * rearranged + gradient
    if bracket < 0:
        caveats.append("negative_energy_bracket")
    rhs = rearranged + math.sqrt(K0 * max(bracket, 0.0))

    h3_lhs = (distance - rearranged) ** 2
    h3_rhs = K0 * (energy + 0.5 * gradient + 2.0 * depth * rearranged)
    components = {
        "K": K.value,
        "K_method": K.method.value,
        "K_bound": bound,
        "K0": K0,
        "l1_distance": distance,
        "rearranged_l1": rearranged,
        "energy_difference": energy,
        "gradient_norm_sq": gradient,
        "phi0_at_zero": ss.potential.phi_at_zero,
        "bracket": bracket,
        "h3_lhs": h3_lhs,
        "h3_rhs": h3_rhs,
        "h3_slack": h3_rhs - h3_lhs,
    }
    return Certificate.evaluate(InequalityId.VP_GLOBAL, distance, rhs, components=components, caveats=caveats)


def certify_vp_z2(f: AtomicFunction, ss: SteadyStateVP) -> Certificate:
    """``H(f) - H(f0) >= -||phi_f||_inf ||f* - f0*|| + J(phi_f) - J(phi_f0)``."""
    f0 = ss.f0
    f0.require_co_atomic(f)
    phi = shell_potential(f)
    rearranged = rearranged_l1_distance(f, f0)
    energy = hamiltonian_vp(f) - hamiltonian_vp(f0)
    j_f = j_functional(phi, ss)
    j_0 = j_functional(ss.shell, ss)
    lhs = energy + phi.sup_abs * rearranged
    rhs = j_f - j_0
    caveats = ["not_equimeasurable"] if rearranged > 1e-12 * f0.integral() else []
    components = {
        "energy_difference": energy,
        "phi_sup": phi.sup_abs,
        "rearranged_l1": rearranged,
        "J_f": j_f,
        "J_f0": j_0,
        "f0_sorting_gap": hamiltonian_vp(f0) - j_0,
    }
    return Certificate.evaluate(InequalityId.VP_Z2, lhs, rhs, sense=Sense.GE, components=components, caveats=caveats)


__all__ = [
    "InterpolationReport",
    "RadialPotential",
    "ShellPotential",
    "SteadyStateVP",
    "VlasovPoissonError",
    "a_e0",
    "a_e0_crosscheck",
    "a_e0_curve",
    "build_steady_vp",
    "certify_vp_global",
    "certify_vp_z2",
    "continuum_hamiltonian",
    "fixed_point_defect",
    "hamiltonian_vp",
    "interpolation_diag",
    "j_functional",
    "poisson_residual",
    "polytrope_density_constant",
    "polytrope_density_quadrature",
    "shell_potential",
    "vp_energy_identity",
]

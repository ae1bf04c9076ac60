"""Two-dimensional Euler equations in vorticity form.

Vorticity fields live on atom carriers: a cell-centred grid over the
periodic strip ``[0, L1) x [0, L2]`` (periodic in x1, Dirichlet at the walls)
or golden-spiral atoms over a disc.  The module provides steady states,
Poisson solvers for both geometries, a pseudo-spectral time stepper on the
strip and the stability certificates for steady states.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import fft as spfft
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import lu_factor, lu_solve
from scipy.special import i0

from config import CFL_MAX, PICARD_MAX_ITER, PICARD_RELAXATION, PICARD_TOL, SCHEME_DRIFT_TOL
from rearrangement.certify import Certificate, InequalityId, Sense
from rearrangement.convexity import ConvexCurve, b_sigma_curve
from rearrangement.measure_core import (
    AtomicFunction,
    Carrier,
    DomainKind,
    beta_of,
    integrate_profiles,
    lp_norm,
    mu_of,
    rearranged_l1_distance,
)
from rearrangement.sigma_fields import (
    SigmaField,
    SigmaSpec,
    build_sigma_field,
    stream_function_field,
)

logger = logging.getLogger(__name__)

Profile = Callable[[np.ndarray], np.ndarray]

# relative agreement required between H and (1/2)||grad psi||^2
ENERGY_CHECK_TOL = 1e-6


class EulerError(RuntimeError):
    pass


class SteadyKind(str, Enum):
    RADIAL = "radial"
    SHEAR = "shear"
    STREAM_MONOTONE = "stream_monotone"


@dataclass(frozen=True, eq=False)
class VorticityField:
    atoms: AtomicFunction

    @property
    def carrier(self) -> Carrier:
        return self.atoms.carrier

    @property
    def values(self) -> np.ndarray:
        return self.atoms.values

    def grid(self) -> np.ndarray:
        """Values as an ``(N2, N1)`` array; rectangle carriers only."""
        _require_rectangle(self.carrier)
        return self.values.reshape(self.carrier.shape)

    @staticmethod
    def from_grid(carrier: Carrier, grid: np.ndarray) -> "VorticityField":
        _require_rectangle(carrier)
        return VorticityField(AtomicFunction(carrier, np.asarray(grid, dtype=float).ravel()))

    @staticmethod
    def from_function(carrier: Carrier, fn: Callable[[np.ndarray], np.ndarray]) -> "VorticityField":
        """Sample ``fn(positions)`` at the atoms."""
        return VorticityField(AtomicFunction(carrier, fn(carrier.positions)))


def _require_rectangle(carrier: Carrier) -> None:
    if carrier.domain.kind is not DomainKind.RECTANGLE or carrier.shape is None or len(carrier.shape) != 2:
        raise EulerError("This operation needs a rectangle grid carrier")


def _require_disc(carrier: Carrier) -> None:
    if carrier.domain.kind is not DomainKind.DISC:
        raise EulerError("This operation needs a disc carrier")


# -- strip Poisson solver -------------------------------------------------------------------


def _split_complex(transform, values: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(values):
        return transform(values.real) + 1j * transform(values.imag)
    return transform(values)


def _sine_analysis(values: np.ndarray) -> np.ndarray:
    """Amplitudes ``A_m`` (m = 1..N) with ``values[n] = sum A_m sin(m pi (n + 1/2) / N)`` along axis 0."""
    n = values.shape[0]

    def analyse(real: np.ndarray) -> np.ndarray:
        coeffs = spfft.dst(real, type=2, axis=0) / n
        coeffs[-1] *= 0.5
        return coeffs

    return _split_complex(analyse, values)


def _sine_synthesis(amplitudes: np.ndarray) -> np.ndarray:
    n = amplitudes.shape[0]

    def synthesise(real: np.ndarray) -> np.ndarray:
        coeffs = real * n
        coeffs[-1] *= 2.0
        return spfft.idst(coeffs, type=2, axis=0)

    return _split_complex(synthesise, amplitudes)


def _cosine_synthesis(amplitudes: np.ndarray) -> np.ndarray:
    """Inverse of the cosine expansion ``sum C_k cos(k pi (n + 1/2) / N)``, k = 0..N-1."""
    n = amplitudes.shape[0]

    def synthesise(real: np.ndarray) -> np.ndarray:
        coeffs = real * n
        coeffs[0] *= 2.0
        return spfft.idct(coeffs, type=2, axis=0)

    return _split_complex(synthesise, amplitudes)


@dataclass
class StreamSolution:
    psi: np.ndarray
    u: np.ndarray
    v: np.ndarray


class StripPoisson:
    """Spectral solver for ``-lap psi = omega`` on the cell-centred strip grid."""

    def __init__(self, carrier: Carrier):
        _require_rectangle(carrier)
        domain = carrier.domain
        self.L1 = domain.L1
        self.L2 = domain.L2
        self.n2, self.n1 = carrier.shape
        self.cell_area = float(carrier.weights[0])
        k1 = 2.0 * math.pi * np.fft.rfftfreq(self.n1, d=self.L1 / self.n1)
        self.k1 = k1[None, :]
        self.kappa = (math.pi / self.L2 * np.arange(1, self.n2 + 1))[:, None]
        self.inverse_laplacian = 1.0 / (self.k1**2 + self.kappa**2)
        index1 = np.arange(k1.size)
        self.derivative_mask = np.ones((1, k1.size))
        if self.n1 % 2 == 0:
            self.derivative_mask[0, -1] = 0.0
        self.dealias1 = (index1 < self.n1 / 3.0)[None, :].astype(float)
        self.dealias2 = (np.arange(1, self.n2 + 1) <= 2.0 * self.n2 / 3.0)[:, None].astype(float)

    def _x2_derivative(self, sine_amplitudes: np.ndarray) -> np.ndarray:
        """Cosine amplitudes of the x2 derivative of a sine series (top mode vanishes on the grid)."""
        cosine = np.zeros_like(sine_amplitudes)
        cosine[1:] = self.kappa[:-1] * sine_amplitudes[:-1]
        return cosine

    def solve(self, omega: np.ndarray) -> StreamSolution:
        spectrum = _sine_analysis(np.fft.rfft(omega, axis=1))
        psi_hat = spectrum * self.inverse_laplacian
        psi = np.fft.irfft(_sine_synthesis(psi_hat), n=self.n1, axis=1)
        dpsi_dx2 = np.fft.irfft(_cosine_synthesis(self._x2_derivative(psi_hat)), n=self.n1, axis=1)
        dpsi_dx1 = np.fft.irfft(_sine_synthesis(1j * self.k1 * self.derivative_mask * psi_hat), n=self.n1, axis=1)
        return StreamSolution(psi=psi, u=-dpsi_dx2, v=dpsi_dx1)

    def minus_laplacian(self, psi: np.ndarray) -> np.ndarray:
        """Spectral ``-lap psi`` for a grid function with the wall conditions; inverse of ``solve``."""
        spectrum = _sine_analysis(np.fft.rfft(psi, axis=1))
        return np.fft.irfft(_sine_synthesis(spectrum / self.inverse_laplacian), n=self.n1, axis=1)

    def tendency(self, omega: np.ndarray) -> np.ndarray:
        """``-d1(u omega) - d2(v omega)`` with 2/3 truncation of the flux spectra."""
        flow = self.solve(omega)
        flux1 = np.fft.rfft(flow.u * omega, axis=1)
        d1 = np.fft.irfft(1j * self.k1 * self.dealias1 * flux1, n=self.n1, axis=1)
        flux2 = _sine_analysis(np.fft.rfft(flow.v * omega, axis=1)) * self.dealias1 * self.dealias2
        d2 = np.fft.irfft(_cosine_synthesis(self._x2_derivative(flux2)), n=self.n1, axis=1)
        return -(d1 + d2)

    def cfl_rate(self, omega: np.ndarray) -> float:
        flow = self.solve(omega)
        h1 = self.L1 / self.n1
        h2 = self.L2 / self.n2
        return float(np.max(np.abs(flow.u) / h1 + np.abs(flow.v) / h2))


@lru_cache(maxsize=8)
def _strip_solver(carrier: Carrier) -> StripPoisson:
    return StripPoisson(carrier)


def poisson_rect(omega: VorticityField) -> StreamSolution:
    """Stream function and velocity ``(u, v) = (-d2 psi, d1 psi)`` on the strip grid."""
    return _strip_solver(omega.carrier).solve(omega.grid())


# -- disc Poisson solvers -------------------------------------------------------------------


def poisson_disc_radial(r: np.ndarray, omega_r: np.ndarray, radius: float) -> np.ndarray:
    """Radial ``-(1/r)(r psi')' = omega`` with ``psi(R) = 0`` by two nested quadratures.

    ``r`` must increase from 0 to ``radius``.
    """
    if not math.isfinite(radius):
        raise EulerError("Radial Dirichlet problem needs a finite radius; use poisson_plane_radial")
    r = np.asarray(r, dtype=float)
    if r[0] != 0.0 or not math.isclose(r[-1], radius):
        raise EulerError("Radial grid must run from 0 to the disc radius")
    enclosed = cumulative_trapezoid(r * np.asarray(omega_r, dtype=float), r, initial=0.0)
    slope = np.zeros_like(r)
    slope[1:] = enclosed[1:] / r[1:]
    outward = cumulative_trapezoid(slope, r, initial=0.0)
    return outward[-1] - outward


def poisson_plane_radial(r: np.ndarray, omega_r: np.ndarray) -> np.ndarray:
    """Whole-plane ``psi = -(1/2pi) log|x| * omega`` for compactly supported radial data."""
    r = np.asarray(r, dtype=float)
    omega_r = np.asarray(omega_r, dtype=float)
    enclosed = cumulative_trapezoid(r * omega_r, r, initial=0.0)
    log_r = np.log(np.where(r > 0, r, 1.0))
    outer_density = r * omega_r * log_r
    outer = cumulative_trapezoid(outer_density, r, initial=0.0)
    return -(enclosed * log_r + (outer[-1] - outer))


class DiscGreenKernel:
    """Dirichlet Green's function of the disc by images, evaluated between atoms.

    The diagonal uses the mean of the log kernel over an equal-area disc,
    so ``matrix @ omega`` is the stream function at the atoms and the
    quadratic form is symmetric in the weighted inner product.
    """

    def __init__(self, carrier: Carrier):
        _require_disc(carrier)
        radius = carrier.domain.radius
        x = carrier.positions
        w = carrier.weights
        sq = np.sum(x**2, axis=1)
        gap = np.sqrt(np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2))
        dot = x @ x.T
        image = np.sqrt(np.maximum(sq[:, None] * sq[None, :] - 2.0 * radius**2 * dot + radius**4, 1e-300)) / radius
        np.fill_diagonal(gap, 1.0)
        green = -(np.log(gap) - np.log(image)) / (2.0 * math.pi)
        rho = np.sqrt(w / math.pi)
        np.fill_diagonal(green, (-(np.log(rho) - 0.5) + np.log((radius**2 - sq) / radius)) / (2.0 * math.pi))
        self.green = green
        self.weights = w
        self.matrix = green * w[None, :]
        self._factor = None

    def stream(self, omega: np.ndarray) -> np.ndarray:
        return self.matrix @ omega

    def minus_laplacian(self, psi: np.ndarray) -> np.ndarray:
        """Atom vorticity whose stream function is ``psi``."""
        if self._factor is None:
            self._factor = lu_factor(self.matrix)
        return lu_solve(self._factor, np.asarray(psi, dtype=float))

    def energy(self, omega: np.ndarray) -> float:
        """``(1/2) int psi omega``."""
        return 0.5 * float(np.dot(self.weights * omega, self.stream(omega)))

    def gradient_norm_sq(self, delta: np.ndarray) -> float:
        """``||grad psi_delta||^2 = int psi_delta delta``."""
        return float(np.dot(self.weights * delta, self.stream(delta)))


@lru_cache(maxsize=8)
def _disc_kernel(carrier: Carrier) -> DiscGreenKernel:
    return DiscGreenKernel(carrier)


def poisson_disc_green(omega: VorticityField) -> np.ndarray:
    return _disc_kernel(omega.carrier).stream(omega.values)


def bessel_stream_oracle(r: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Stream function of the steady state ``omega = (1 - psi)_+`` on a disc: ``1 - I0(r)/I0(R)``."""
    return 1.0 - i0(np.asarray(r, dtype=float)) / i0(radius)


# -- steady states ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SteadyStateEuler:
    kind: SteadyKind
    field: VorticityField
    profile: Profile
    psi0: Optional[np.ndarray] = None
    residual_history: Tuple[float, ...] = ()
    fixed_point_residual: Optional[float] = None

    @property
    def omega0(self) -> AtomicFunction:
        return self.field.atoms

    @cached_property
    def sigma(self) -> SigmaField:
        carrier = self.field.carrier
        if self.kind is SteadyKind.RADIAL:
            return build_sigma_field(SigmaSpec.radius_squared(), carrier)
        if self.kind is SteadyKind.SHEAR:
            return build_sigma_field(SigmaSpec.coord_x2(), carrier)
        return stream_function_field(self.psi0, carrier)


def _check_profile(profile: Profile, *, require_positive_origin: bool = False, upper: float = 10.0) -> None:
    samples = np.asarray(profile(np.linspace(0.0, upper, 401)), dtype=float)
    if np.any(samples < 0) or not np.all(np.isfinite(samples)):
        raise EulerError("Steady-state profiles must be finite and nonnegative")
    if np.any(np.diff(samples) > 1e-14 * max(1.0, float(np.max(samples)))):
        raise EulerError("Steady-state profiles must be nonincreasing")
    if require_positive_origin and not samples[0] > 0:
        raise EulerError("The profile F must satisfy F(0) > 0")


def radial_steady_state(G: Profile, radius: float, n_atoms: int) -> SteadyStateEuler:
    """``omega0(x) = G(|x|)`` on golden-spiral atoms."""
    _check_profile(G, upper=radius)
    carrier = Carrier.disc_spiral(radius, n_atoms)
    values = np.asarray(G(carrier.radii()), dtype=float)
    return SteadyStateEuler(SteadyKind.RADIAL, VorticityField(AtomicFunction(carrier, values)), G)


def shear_steady_state(F: Profile, L1: float, L2: float, N1: int, N2: int) -> SteadyStateEuler:
    """``omega0(x) = F(x2)`` on the strip grid."""
    _check_profile(F, upper=L2)
    carrier = Carrier.rectangle_grid(L1, L2, N1, N2)
    values = np.asarray(F(carrier.positions[:, 1]), dtype=float)
    return SteadyStateEuler(SteadyKind.SHEAR, VorticityField(AtomicFunction(carrier, values)), F)


def build_psi0(
    F: Profile,
    carrier: Carrier,
    *,
    relaxation: float = PICARD_RELAXATION,
    tol: float = PICARD_TOL,
    max_iter: int = PICARD_MAX_ITER,
) -> SteadyStateEuler:
    """Damped Picard iteration ``psi <- (1-r) psi + r Poisson(F(psi))`` from ``psi = 0``.

    Iteration stops once ``max |-lap psi - F(psi)| < tol`` for the discrete
    Laplacian the Poisson solver inverts.  The returned vorticity is
    ``F(psi0)`` evaluated at the returned iterate, so it is an exact fixed
    point of the psi0-rearrangement.
    """
    _check_profile(F, require_positive_origin=True)
    if carrier.domain.kind is DomainKind.DISC:
        kernel = _disc_kernel(carrier)
        solve = kernel.stream
        minus_laplacian = kernel.minus_laplacian
    elif carrier.domain.kind is DomainKind.RECTANGLE:
        solver = _strip_solver(carrier)
        shape = carrier.shape
        solve = lambda omega: solver.solve(omega.reshape(shape)).psi.ravel()  # noqa: E731
        minus_laplacian = lambda psi: solver.minus_laplacian(psi.reshape(shape)).ravel()  # noqa: E731
    else:
        raise EulerError(f"build_psi0 supports discs and strips, not {carrier.domain.kind.value}")

    psi = np.zeros(carrier.size)
    history: List[float] = []
    for iteration in range(max_iter):
        omega = np.asarray(F(psi), dtype=float)
        target = solve(omega)
        fixed_point = float(np.max(np.abs(target - psi)))
        residual = float(np.max(np.abs(minus_laplacian(psi) - omega)))
        history.append(residual)
        if residual < tol:
            logger.info(
                "Picard iteration converged after %d steps (residual %.2e, fixed point %.2e)",
                iteration,
                residual,
                fixed_point,
            )
            break
        psi = (1.0 - relaxation) * psi + relaxation * target
    else:
        raise EulerError(
            f"Picard iteration did not converge in {max_iter} steps; last residuals {history[-5:]}"
        )
    omega0 = AtomicFunction(carrier, np.asarray(F(psi), dtype=float))
    return SteadyStateEuler(
        SteadyKind.STREAM_MONOTONE,
        VorticityField(omega0),
        F,
        psi0=psi,
        residual_history=tuple(history),
        fixed_point_residual=fixed_point,
    )


@dataclass(frozen=True)
class Psi0Curve:
    curve: ConvexCurve
    strictly_convex: bool
    min_increment: float


def psi0_curve(ss: SteadyStateEuler, *, threshold: float = 1e-12) -> Psi0Curve:
    """``Psi0(mu) = int_0^mu psi0^sharp(meas - s) ds`` and its strict-convexity check."""
    if ss.kind is not SteadyKind.STREAM_MONOTONE:
        raise EulerError("Psi0 needs a stream-monotone steady state")
    curve = b_sigma_curve(ss.sigma)
    increments = np.diff(ss.sigma.b_curve.values[1:])
    minimum = float(increments.min()) if increments.size else math.inf
    return Psi0Curve(curve=curve, strictly_convex=bool(minimum > threshold), min_increment=minimum)


# -- functionals -----------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentumFunctionals:
    A: float
    B: float
    H: float
    half_gradient: float

    @property
    def energy_mismatch(self) -> float:
        """Relative gap between ``H`` and ``(1/2) ||grad psi||^2``."""
        return abs(self.H - self.half_gradient) / max(abs(self.H), 1e-300)

    @property
    def energy_consistent(self) -> bool:
        return self.energy_mismatch <= ENERGY_CHECK_TOL


def momentum_functionals(omega: VorticityField) -> MomentumFunctionals:
    """``A = int |x|^2 w``, ``B = int x2 w`` and ``H = (1/2) int psi w``.

    ``half_gradient`` is ``(1/2) ||grad psi||^2`` computed on a separate path:
    spectral velocities on the strip, ``int psi (-lap psi)`` with the
    factorised disc Laplacian on the disc.
    """
    atoms = omega.atoms
    radius2 = np.sum(atoms.positions**2, axis=1)
    A = atoms.integrate_against(radius2)
    B = atoms.integrate_against(atoms.positions[:, 1])
    kind = atoms.domain.kind
    if kind is DomainKind.RECTANGLE:
        flow = poisson_rect(omega)
        area = float(atoms.weights[0])
        H = 0.5 * area * float(np.sum(flow.psi * omega.grid()))
        half_gradient = 0.5 * area * float(np.sum(flow.u**2 + flow.v**2))
    elif kind is DomainKind.DISC:
        kernel = _disc_kernel(atoms.carrier)
        H = kernel.energy(atoms.values)
        psi = kernel.stream(atoms.values)
        half_gradient = 0.5 * float(np.dot(atoms.weights * psi, kernel.minus_laplacian(psi)))
    else:
        raise EulerError(f"Energy is not available on a {kind.value} domain")
    functionals = MomentumFunctionals(A=A, B=B, H=H, half_gradient=half_gradient)
    if not functionals.energy_consistent:
        logger.warning("Energy %.8e and half gradient norm %.8e disagree", H, half_gradient)
    return functionals


def _energy_and_gradient(omega: AtomicFunction, omega0: AtomicFunction) -> Tuple[float, float, np.ndarray]:
    """``H(omega) - H(omega0)``, ``||grad(psi - psi0)||^2`` and ``psi(omega0)`` at the atoms."""
    carrier = omega.carrier
    delta = omega.values - omega0.values
    if carrier.domain.kind is DomainKind.DISC:
        kernel = _disc_kernel(carrier)
        psi_ref = kernel.stream(omega0.values)
        return kernel.energy(omega.values) - kernel.energy(omega0.values), kernel.gradient_norm_sq(delta), psi_ref
    solver = _strip_solver(carrier)
    shape = carrier.shape
    area = float(carrier.weights[0])
    flow = solver.solve(omega.values.reshape(shape))
    flow0 = solver.solve(omega0.values.reshape(shape))
    energy = 0.5 * area * (float(np.sum(flow.psi.ravel() * omega.values)) - float(np.sum(flow0.psi.ravel() * omega0.values)))
    delta_flow = solver.solve(delta.reshape(shape))
    gradient = area * float(np.sum(delta_flow.psi.ravel() * delta))
    return energy, gradient, flow0.psi.ravel()


def energy_identity(omega: AtomicFunction, ss: SteadyStateEuler) -> float:
    """Relative residual of ``H(w) - H(w0) = int psi0 (w - w0) + (1/2)||grad(psi - psi0)||^2``."""
    omega.require_co_atomic(ss.omega0)
    energy, gradient, psi_ref = _energy_and_gradient(omega, ss.omega0)
    linear = omega.integrate_against(psi_ref) - ss.omega0.integrate_against(psi_ref)
    residual = energy - linear - 0.5 * gradient
    return abs(residual) / max(abs(energy), abs(linear), 1e-300)


def disc_momentum_identity(q: AtomicFunction) -> Tuple[float, float]:
    """``A(q)`` and ``(1/(2 pi)) int mu_q(s)^2 ds``."""
    _require_disc(q.carrier)
    A = q.integrate_against(np.sum(q.positions**2, axis=1))
    half = integrate_profiles(lambda m: m * m, mu_of(q)) / (2.0 * math.pi)
    return A, half


# -- certificates ----------------------------------------------------------------------------


def certify_euler_symmetric(
    omega_in: AtomicFunction,
    omega_t: AtomicFunction,
    q: SteadyStateEuler,
) -> Certificate:
    """Stability of radial (disc) and shear (strip) steady states.

    ``(||w_t - q|| + ||q|| - ||w_in||)^2 <= C ||q||_inf [int sigma (w_in - q) + c int mu_q beta]``
    with ``C, c = 4 pi, 2/pi`` on the disc and ``4 L1, 2/L1`` on the strip.
    """
    steady = q.omega0
    if q.kind is SteadyKind.RADIAL:
        _require_disc(steady.carrier)
        width = math.pi
        inequality = InequalityId.EULER_RADIAL
    elif q.kind is SteadyKind.SHEAR:
        _require_rectangle(steady.carrier)
        width = steady.domain.L1
        inequality = InequalityId.EULER_STRIP
    else:
        raise EulerError("Symmetric stability certificates need a radial or shear steady state")
    steady.require_co_atomic(omega_in, omega_t)
    sigma = q.sigma.values
    top = lp_norm(steady, math.inf)
    constant = 4.0 * width * top
    coefficient = 2.0 / width
    energy = omega_in.integrate_against(sigma) - steady.integrate_against(sigma)
    mu_q = mu_of(steady)
    mu_in = mu_of(omega_in)
    mu_beta = integrate_profiles(lambda mq, mi: mq * np.maximum(mq - mi, 0.0), mu_q, mu_in)
    rhs = constant * (energy + coefficient * mu_beta)
    lhs = (omega_t.l1_distance(steady) + lp_norm(steady, 1) - lp_norm(omega_in, 1)) ** 2

    support = float(np.sum(steady.weights[steady.values > 0]))
    rearranged = rearranged_l1_distance(omega_in, steady)
    rhs_compact = constant * (energy + coefficient * support * rearranged)
    drift = omega_t.integrate_against(sigma) - omega_in.integrate_against(sigma)
    components = {
        "constant": constant,
        "coefficient": coefficient,
        "sigma_energy": energy,
        "mu_q_beta": mu_beta,
        "support_measure": support,
        "rearranged_l1": rearranged,
        "rhs_compact": rhs_compact,
        "compact_slack": rhs_compact - lhs,
        "sigma_moment_drift": drift,
    }
    if q.kind is SteadyKind.SHEAR:
        displayed = 4.0 * top * (energy + coefficient * mu_beta)
        components["rhs_displayed_constant"] = displayed
        components["displayed_constant_slack"] = displayed - lhs
    caveats = []
    moment_in = omega_in.integrate_against(sigma)
    if abs(drift) > SCHEME_DRIFT_TOL * max(abs(moment_in), 1e-300):
        caveats.append("sigma_moment_not_conserved")
    return Certificate.evaluate(inequality, lhs, rhs, components=components, caveats=caveats)


def certify_euler_domain(omega: AtomicFunction, ss: SteadyStateEuler) -> Certificate:
    """Stability of ``omega0 = F(psi0)``:

    ``H(w) - H(w0) + ||psi0||_inf ||w* - w0*|| >= c ||grad(psi - psi0)||^2 + convexity gap of Psi0``.
    """
    if ss.kind is not SteadyKind.STREAM_MONOTONE:
        raise EulerError("certify_euler_domain needs a stream-monotone steady state")
    omega0 = ss.omega0
    omega0.require_co_atomic(omega)
    psi_curve = psi0_curve(ss)
    curve = psi_curve.curve
    energy, gradient, _ = _energy_and_gradient(omega, omega0)
    psi_sup = float(np.max(np.abs(ss.psi0)))
    rearranged = rearranged_l1_distance(omega, omega0)
    lhs = energy + psi_sup * rearranged
    mu0 = mu_of(omega0)
    beta = beta_of(omega, omega0)
    convex_gap = integrate_profiles(lambda m, b: curve(m + b) + curve(m - b) - 2.0 * curve(m), mu0, beta)
    rhs = 0.5 * gradient + convex_gap
    rhs_full = gradient + convex_gap
    scale = max(abs(lhs), abs(rhs_full), 1.0)
    components = {
        "energy_difference": energy,
        "psi0_sup": psi_sup,
        "rearranged_l1": rearranged,
        "gradient_norm_sq": gradient,
        "psi0_convex_gap": convex_gap,
        "c_grad": 0.5,
        "c_grad_one_slack": lhs - rhs_full,
        "c_grad_one_holds": bool(lhs - rhs_full >= -1e-9 * scale),
        "psi0_min_slope_increment": psi_curve.min_increment,
        "picard_residual": ss.residual_history[-1] if ss.residual_history else 0.0,
    }
    caveats = [] if psi_curve.strictly_convex else ["psi0_not_strictly_convex"]
    return Certificate.evaluate(
        InequalityId.EULER_DOMAIN, lhs, rhs, sense=Sense.GE, components=components, caveats=caveats
    )


# -- time evolution --------------------------------------------------------------------------


@dataclass
class TrajectorySample:
    t: float
    field: VorticityField
    mass_drift: float
    momentum_drift: float
    distribution_drift: float
    clipped_mass: float
    cfl: float


@dataclass
class Trajectory:
    dt: float
    steps: int
    T: float
    samples: List[TrajectorySample] = field(default_factory=list)

    @property
    def max_cfl(self) -> float:
        return max((sample.cfl for sample in self.samples), default=0.0)


def _snapshot(
    t: float,
    grid: np.ndarray,
    carrier: Carrier,
    reference: AtomicFunction,
    mass0: float,
    momentum0: float,
    cfl: float,
) -> TrajectorySample:
    values = grid.ravel()
    clipped = float(np.dot(carrier.weights, np.maximum(-values, 0.0)))
    atoms = AtomicFunction(carrier, np.maximum(values, 0.0))
    mass = float(np.dot(carrier.weights, values))
    momentum = float(np.dot(carrier.weights * carrier.positions[:, 1], values))
    return TrajectorySample(
        t=t,
        field=VorticityField(atoms),
        mass_drift=abs(mass - mass0) / max(abs(mass0), 1e-300),
        momentum_drift=abs(momentum - momentum0) / max(abs(momentum0), 1e-300),
        distribution_drift=rearranged_l1_distance(atoms, reference) / max(abs(mass0), 1e-300),
        clipped_mass=clipped,
        cfl=cfl,
    )


def evolve_strip(
    omega0: VorticityField,
    T: float,
    dt: Optional[float] = None,
    *,
    samples: int = 10,
    cfl_target: float = 0.5,
    cfl_max: float = CFL_MAX,
) -> Trajectory:
    """Classical RK4 on ``d_t w + d1(u w) + d2(v w) = 0`` with samples at ``T * k / samples``."""
    carrier = omega0.carrier
    solver = _strip_solver(carrier)
    grid = omega0.grid().astype(float).copy()
    rate = solver.cfl_rate(grid)
    if dt is None:
        dt = T if rate == 0 else cfl_target / rate
    steps_per_sample = max(1, math.ceil(T / (samples * dt)))
    total = steps_per_sample * samples
    dt = T / total
    cfl = dt * rate
    logger.info("evolve_strip: %d RK4 steps of %.3e, CFL %.3f", total, dt, cfl)
    if cfl > cfl_max:
        raise EulerError(f"CFL number {cfl:.3f} exceeds {cfl_max}; reduce dt")

    reference = omega0.atoms
    mass0 = reference.integral()
    momentum0 = reference.integrate_against(carrier.positions[:, 1])
    trajectory = Trajectory(dt=dt, steps=total, T=T)
    trajectory.samples.append(_snapshot(0.0, grid, carrier, reference, mass0, momentum0, cfl))
    for sample in range(1, samples + 1):
        for _ in range(steps_per_sample):
            k1 = solver.tendency(grid)
            k2 = solver.tendency(grid + 0.5 * dt * k1)
            k3 = solver.tendency(grid + 0.5 * dt * k2)
            k4 = solver.tendency(grid + dt * k3)
            grid = grid + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        cfl = dt * solver.cfl_rate(grid)
        if cfl > cfl_max:
            raise EulerError(f"CFL number {cfl:.3f} exceeded {cfl_max} at t={sample * steps_per_sample * dt:.4f}")
        trajectory.samples.append(
            _snapshot(sample * steps_per_sample * dt, grid, carrier, reference, mass0, momentum0, cfl)
        )
    return trajectory


__all__ = [
    "DiscGreenKernel",
    "EulerError",
    "MomentumFunctionals",
    "Psi0Curve",
    "SteadyKind",
    "SteadyStateEuler",
    "StreamSolution",
    "StripPoisson",
    "Trajectory",
    "TrajectorySample",
    "VorticityField",
    "bessel_stream_oracle",
    "build_psi0",
    "certify_euler_domain",
    "certify_euler_symmetric",
    "disc_momentum_identity",
    "energy_identity",
    "evolve_strip",
    "momentum_functionals",
    "poisson_disc_green",
    "poisson_disc_radial",
    "poisson_plane_radial",
    "poisson_rect",
    "psi0_curve",
    "radial_steady_state",
    "shear_steady_state",
]

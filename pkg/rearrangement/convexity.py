"""Convex primitives ``B_sigma`` of ``b_sigma``, the modulus ``H_sigma`` and the constant ``K(q*, sigma)``."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

from config import H_FLOOR, H_GRID_SAMPLES
from rearrangement.measure_core import AtomicFunction, lp_norm, mu_of, unit_ball_volume
from rearrangement.sigma_fields import SigmaField, SigmaKind

if TYPE_CHECKING:
    from rearrangement.vlasov_poisson import SteadyStateVP

logger = logging.getLogger(__name__)


class ConvexityError(RuntimeError):
    pass


class Extension(str, Enum):
    FORBIDDEN = "forbidden"
    LINEAR = "linear"


class Interpolation(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    CLOSED_FORM = "closed_form"


class KMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    PIECEWISE_EXACT = "piecewise_exact"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True, eq=False)
class ConvexCurve:
    """Sampled convex function of measure, starting at ``knots[0] == 0``.

    ``slopes`` are the values of ``b`` at the knots; with them the quadratic
    mode integrates a piecewise-linear ``b`` exactly.  A ``closed_form``
    overrides the samples for evaluation.
    """

    knots: np.ndarray
    values: np.ndarray
    interpolation: Interpolation = Interpolation.LINEAR
    slopes: Optional[np.ndarray] = None
    extension: Extension = Extension.LINEAR
    tail_slope: float = 0.0
    closed_form: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.knots.size < 2 or not np.all(np.diff(self.knots) > 0):
            raise ConvexityError("ConvexCurve needs at least two strictly increasing knots")
        if self.interpolation is Interpolation.QUADRATIC and (self.slopes is None or self.slopes.size != self.knots.size):
            raise ConvexityError("Quadratic interpolation needs one slope per knot")

    @property
    def end(self) -> float:
        return float(self.knots[-1])

    def __call__(self, mu):
        mu = np.maximum(np.asarray(mu, dtype=float), 0.0)
        if self.closed_form is not None:
            return self.closed_form(mu)
        beyond = mu > self.knots[-1]
        if np.any(beyond) and self.extension is Extension.FORBIDDEN:
            raise ConvexityError(f"B evaluated at {float(np.max(mu))} beyond the last knot {self.end}")
        inside = np.minimum(mu, self.knots[-1])
        if self.interpolation is Interpolation.QUADRATIC:
            index = np.clip(np.searchsorted(self.knots, inside, side="right") - 1, 0, self.knots.size - 2)
            left = self.knots[index]
            span = self.knots[index + 1] - left
            delta = inside - left
            b_left = self.slopes[index]
            b_right = self.slopes[index + 1]
            result = self.values[index] + b_left * delta + (b_right - b_left) * delta**2 / (2.0 * span)
        else:
            result = np.interp(inside, self.knots, self.values)
        result = result + np.where(beyond, self.tail_slope * (mu - self.knots[-1]), 0.0)
        return float(result) if result.ndim == 0 else result

    def second_differences(self) -> np.ndarray:
        """Discrete second differences over consecutive knot triples."""
        values = self(self.knots) if self.closed_form is not None else self.values
        chords = np.diff(values) / np.diff(self.knots)
        return np.diff(chords)

    def slope_increments(self) -> np.ndarray:
        if self.slopes is not None:
            return np.diff(self.slopes)
        return self.second_differences()

    def is_convex(self, rel_tol: float = 1e-12) -> bool:
        increments = self.second_differences()
        values = self(self.knots) if self.closed_form is not None else self.values
        chords = np.abs(np.diff(values) / np.diff(self.knots))
        scale = np.maximum(chords[:-1], chords[1:]) if chords.size > 1 else np.ones(0)
        return bool(np.all(increments >= -rel_tol * np.maximum(scale, 1.0)))


@dataclass(frozen=True)
class KConstant:
    value: float
    method: KMethod
    h_floor: float

    @property
    def conclusive(self) -> bool:
        return self.method is not KMethod.INCONCLUSIVE


def b_sigma_curve(sigma: SigmaField, *, samples: int = 257) -> ConvexCurve:
    """``B_sigma(mu) = int_0^mu b_sigma``.

    Analytic families evaluate their closed form.  Empirical ``b`` is a step
    function, so ``B`` is exactly piecewise linear with knots at the
    cumulative measures, continued linearly with the last slope.
    """
    if sigma.is_analytic:
        knots = np.linspace(0.0, sigma.measure, samples)
        closed = sigma.analytic.B
        return ConvexCurve(
            knots=knots,
            values=np.asarray(closed(knots), dtype=float),
            interpolation=Interpolation.CLOSED_FORM,
            closed_form=closed,
        )
    if not math.isfinite(sigma.e_min):
        raise ConvexityError("B_sigma is not finite when sigma is unbounded below")
    b_curve = sigma.b_curve
    steps = b_curve.values[1:]
    knots = np.concatenate([b_curve.breakpoints, [sigma.a_curve.right_tail]])
    values = np.concatenate([[0.0], np.cumsum(steps * np.diff(knots))])
    return ConvexCurve(knots=knots, values=values, interpolation=Interpolation.LINEAR, tail_slope=float(steps[-1]))


def _closed_form_h(sigma: SigmaField) -> Optional[Callable]:
    if sigma.analytic is not None and sigma.analytic.H is not None:
        return sigma.analytic.H
    return None


def h_sigma(sigma: SigmaField, mu: float, *, curve: Optional[ConvexCurve] = None) -> float:
    """``inf_{0<s<=mu} [B(mu+s) + B(mu-s) - 2B(mu)] / s**2``."""
    if not mu > 0:
        raise ConvexityError(f"H_sigma needs mu > 0, got {mu}")
    if sigma.analytic is None and mu > sigma.measure * (1.0 + 1e-12):
        raise ConvexityError(f"mu={mu} exceeds the measure {sigma.measure} of the sigma domain")
    closed = _closed_form_h(sigma)
    if closed is not None:
        return float(closed(mu))
    curve = curve if curve is not None else b_sigma_curve(sigma)
    offsets = mu * np.geomspace(1e-6, 1.0, max(H_GRID_SAMPLES, 64))
    if curve.closed_form is None:
        near = curve.knots[(curve.knots > 0) & (curve.knots <= 2.0 * mu)]
        knot_offsets = np.abs(near - mu)
        knot_offsets = knot_offsets[(knot_offsets > 0) & (knot_offsets <= mu)]
        offsets = np.concatenate([offsets, knot_offsets])
    centre = curve(mu)
    quotients = (curve(mu + offsets) + curve(mu - offsets) - 2.0 * centre) / offsets**2
    return max(float(np.min(quotients)), 0.0)


def _plateaus_below_max(q: AtomicFunction):
    """Lengths and ``mu_q`` values of the plateaus of ``mu_q`` on ``[0, ||q||_inf)``."""
    mu = mu_of(q)
    top = q.max_value()
    starts = np.concatenate([[0.0], mu.breakpoints[(mu.breakpoints > 0) & (mu.breakpoints < top)]])
    ends = np.append(starts[1:], top)
    return ends - starts, np.atleast_1d(mu(starts))


def k_constant(q: AtomicFunction, sigma: SigmaField, *, curve: Optional[ConvexCurve] = None) -> KConstant:
    """``K = 4 int_0^{||q||_inf} dt / H_sigma(mu_q(t))``, summed plateau by plateau."""
    top = q.max_value()
    if top <= 0:
        raise ConvexityError("K(q*, sigma) is undefined for q == 0")
    if sigma.kind in (SigmaKind.RADIUS_SQUARED, SigmaKind.COORD_X2):
        h = float(sigma.analytic.H(1.0))
        return KConstant(4.0 * top / h, KMethod.CLOSED_FORM, h)
    lengths, plateau_mu = _plateaus_below_max(q)
    closed = _closed_form_h(sigma)
    if closed is not None:
        h_values = np.asarray(closed(plateau_mu), dtype=float)
        method = KMethod.CLOSED_FORM
    else:
        curve = curve if curve is not None else b_sigma_curve(sigma)
        unique_mu, inverse = np.unique(plateau_mu, return_inverse=True)
        h_unique = np.array([h_sigma(sigma, float(m), curve=curve) for m in unique_mu])
        h_values = h_unique[inverse]
        method = KMethod.PIECEWISE_EXACT
    h_floor = float(np.min(h_values))
    if h_floor <= H_FLOOR:
        logger.info("H_sigma dropped to %.3e on a plateau of mu_q; K is inconclusive", h_floor)
        return KConstant(math.inf, KMethod.INCONCLUSIVE, h_floor)
    return KConstant(float(4.0 * np.sum(lengths / h_values)), method, h_floor)


def power_law_k_bound(q: AtomicFunction, m: float, d: int) -> float:
    """Jensen bound ``4 (d/m) K_d^(m/d) ||q||_inf^(m/d) ||q||_1^(1-m/d)``."""
    if not (0 < m <= d):
        raise ConvexityError(f"Power-law exponent must lie in (0, d], got m={m}, d={d}")
    ratio = m / d
    return (
        4.0
        * (d / m)
        * unit_ball_volume(d) ** ratio
        * lp_norm(q, math.inf) ** ratio
        * lp_norm(q, 1) ** (1.0 - ratio)
    )


def vp_k_bound(steady: "SteadyStateVP") -> float:
    """``8 ||f0||_inf a'(b(meas Supp f0))`` with ``a'`` by central difference."""
    f0 = steady.f0
    top = lp_norm(f0, math.inf)
    if top <= 0:
        raise ConvexityError("The steady state f0 vanishes identically")
    jacobian = steady.jacobian
    support = max(steady.support_measure, float(mu_of(f0)(0.0)))
    level = float(jacobian.b(support))
    if not (0.0 < level < jacobian.e_max):
        raise ConvexityError(f"Support measure {support} maps outside the a_e0 range (level {level})")
    step = 1e-5 * min(level, jacobian.e_max - level)
    slope = (float(jacobian.a(level + step)) - float(jacobian.a(level - step))) / (2.0 * step)
    return 8.0 * top * slope


__all__ = [
    "ConvexCurve",
    "ConvexityError",
    "Extension",
    "Interpolation",
    "KConstant",
    "KMethod",
    "b_sigma_curve",
    "h_sigma",
    "k_constant",
    "power_law_k_bound",
    "vp_k_bound",
]

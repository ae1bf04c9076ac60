import math

import numpy as np
import pytest

from rearrangement.convexity import (
    ConvexCurve,
    ConvexityError,
    Interpolation,
    KMethod,
    b_sigma_curve,
    h_sigma,
    k_constant,
    power_law_k_bound,
)
from rearrangement.measure_core import AtomicFunction, Carrier
from rearrangement.random_functions import TrialStreams, random_function
from rearrangement.sigma_fields import SigmaSpec, build_sigma_field


@pytest.mark.parametrize("top", [0.5, 1.0, 3.0])
def test_disc_constant_is_four_pi_sup(top):
    carrier = Carrier.disc_spiral(1.0, 128)
    sigma = build_sigma_field(SigmaSpec.radius_squared(), carrier)
    q = AtomicFunction(carrier, top * np.maximum(1.0 - carrier.radii() ** 2, 0.0))
    K = k_constant(q, sigma)
    assert K.method is KMethod.CLOSED_FORM
    assert K.value == pytest.approx(4.0 * math.pi * q.max_value(), rel=1e-12)


@pytest.mark.parametrize("L1", [0.5, 1.0, 2.5])
@pytest.mark.parametrize("top", [0.25, 1.0, 4.0])
def test_strip_constant_is_four_l1_sup(L1, top):
    carrier = Carrier.rectangle_grid(L1, 1.0, 8, 8)
    sigma = build_sigma_field(SigmaSpec.coord_x2(), carrier)
    q = AtomicFunction(carrier, top * np.maximum(1.0 - carrier.positions[:, 1], 0.0))
    assert k_constant(q, sigma).value == pytest.approx(4.0 * L1 * q.max_value(), rel=1e-12)


def test_k_constant_rejects_zero_function():
    carrier = Carrier.disc_spiral(1.0, 16)
    sigma = build_sigma_field(SigmaSpec.radius_squared(), carrier)
    with pytest.raises(ConvexityError):
        k_constant(AtomicFunction.zeros(carrier), sigma)


def test_analytic_curve_uses_closed_form():
    carrier = Carrier.disc_spiral(1.0, 64)
    sigma = build_sigma_field(SigmaSpec.radius_squared(), carrier)
    curve = b_sigma_curve(sigma)
    assert curve.interpolation is Interpolation.CLOSED_FORM
    assert curve(2.0) == pytest.approx(4.0 / (2.0 * math.pi))
    assert curve.is_convex()


def test_empirical_curve_is_piecewise_linear_and_convex():
    carrier = Carrier.rectangle_grid(1.0, 1.0, 4, 1)
    sigma = build_sigma_field(SigmaSpec.empirical(np.array([3.0, 1.0, 2.0, 0.5])), carrier)
    curve = b_sigma_curve(sigma)
    assert curve.knots.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert curve.values.tolist() == pytest.approx([0.0, 0.125, 0.375, 0.875, 1.625])
    assert curve(1.5) == pytest.approx(1.625 + 0.5 * 3.0)
    assert np.all(curve.second_differences() >= 0)
    assert np.all(curve.slope_increments() >= 0)


def test_random_empirical_curves_are_convex():
    streams = TrialStreams(11)
    carrier = Carrier.disc_spiral(1.0, 400)
    for index in range(5):
        values = random_function(streams.trial("curve", index), carrier).values
        values = values + 1e-3 * carrier.radii()
        sigma = build_sigma_field(SigmaSpec.empirical(values), carrier)
        assert b_sigma_curve(sigma).is_convex()


def test_h_sigma_of_linear_family_is_reciprocal_width():
    carrier = Carrier.rectangle_grid(2.0, 1.0, 4, 4)
    sigma = build_sigma_field(SigmaSpec.coord_x2(), carrier)
    assert h_sigma(sigma, 0.7) == pytest.approx(0.5)
    with pytest.raises(ConvexityError):
        h_sigma(sigma, 0.0)


def test_h_sigma_numeric_matches_uniform_empirical_field():
    n = 200
    carrier = Carrier.rectangle_grid(1.0, 1.0, n, 1)
    # equally spaced sigma mimics b(mu) = mu, so B = mu^2 / 2 and H = 1
    sigma = build_sigma_field(SigmaSpec.empirical(np.arange(n) / n), carrier)
    assert h_sigma(sigma, 0.5) == pytest.approx(1.0, rel=0.05)


def test_power_law_bound_dominates_constant():
    carrier = Carrier.disc_spiral(1.0, 512)
    streams = TrialStreams(5)
    for m in (0.5, 1.0, 2.0):
        sigma = build_sigma_field(SigmaSpec.power_law(m, 2), carrier)
        for index in range(3):
            q = random_function(streams.trial(f"bound-{m}", index), carrier)
            K = k_constant(q, sigma)
            assert K.value <= power_law_k_bound(q, m, 2) * (1 + 1e-9)


def test_convex_curve_validates_knots():
    with pytest.raises(ConvexityError):
        ConvexCurve(knots=np.array([0.0]), values=np.array([0.0]))
    with pytest.raises(ConvexityError):
        ConvexCurve(knots=np.array([0.0, 1.0]), values=np.array([0.0, 1.0]), interpolation=Interpolation.QUADRATIC)

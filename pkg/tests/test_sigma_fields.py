import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rearrangement.measure_core import AtomicFunction, Carrier, CarrierMismatchError, mu_of
from rearrangement.random_functions import TrialStreams, random_function
from rearrangement.sigma_fields import (
    SigmaFieldError,
    SigmaKind,
    SigmaSpec,
    build_sigma_field,
    lemma21_report,
    read_sigma_csv,
    schwarz_rearrange,
    sigma_rearrange,
    write_sigma_csv,
)


def disc_field(n=256):
    carrier = Carrier.disc_spiral(1.0, n)
    return carrier, build_sigma_field(SigmaSpec.radius_squared(), carrier)


def test_rearrangement_is_equimeasurable_and_sorted_by_sigma():
    carrier, sigma = disc_field()
    f = random_function(TrialStreams(3).trial("sigma", 0), carrier)

    rearranged = sigma_rearrange(f, sigma)

    assert rearranged.carrier is carrier
    assert mu_of(rearranged).same_as(mu_of(f))
    by_sigma = rearranged.values[sigma.order]
    assert np.all(np.diff(by_sigma) <= 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=5.0, allow_nan=False), min_size=2, max_size=30))
def test_empirical_rearrangement_is_equimeasurable(values):
    n = len(values)
    carrier = Carrier.rectangle_grid(1.0, 1.0, n, 1)
    sigma = build_sigma_field(SigmaSpec.empirical(np.arange(n)[::-1].astype(float)), carrier)
    f = AtomicFunction(carrier, values)
    rearranged = sigma_rearrange(f, sigma)
    assert mu_of(rearranged).same_as(mu_of(f))
    assert sigma_rearrange(rearranged, sigma).values.tolist() == rearranged.values.tolist()


def test_radial_profile_is_a_fixed_point():
    carrier, sigma = disc_field()
    q = AtomicFunction(carrier, np.maximum(1.0 - carrier.radii() ** 2, 0.0))
    assert np.array_equal(sigma_rearrange(q, sigma).values, q.values)
    assert np.array_equal(schwarz_rearrange(q).values, q.values)


def test_shear_profile_is_a_fixed_point_of_coord_x2():
    carrier = Carrier.rectangle_grid(2.0, 1.0, 8, 8)
    sigma = build_sigma_field(SigmaSpec.coord_x2(), carrier)
    q = AtomicFunction(carrier, np.maximum(1.0 - carrier.positions[:, 1], 0.0))
    assert np.array_equal(sigma_rearrange(q, sigma).values, q.values)
    assert sigma.tie_mass == pytest.approx(carrier.measure)


def test_unequal_weights_split_onto_refined_carrier():
    carrier = Carrier.from_arrays(Carrier.rectangle_grid(1.0, 1.0, 1, 1).domain, [[0.5, 0.2], [0.5, 0.7]], [0.25, 0.75])
    sigma = build_sigma_field(SigmaSpec.coord_x2(), carrier)
    f = AtomicFunction(carrier, [0.0, 2.0])

    rearranged = sigma_rearrange(f, sigma)

    assert rearranged.carrier.size == 3
    assert rearranged.carrier.weights.tolist() == [0.25, 0.5, 0.25]
    assert rearranged.values.tolist() == [2.0, 2.0, 0.0]
    assert rearranged.carrier.positions[:, 1].tolist() == [0.2, 0.7, 0.7]
    assert rearranged.integral() == pytest.approx(f.integral())
    assert mu_of(rearranged).same_as(mu_of(f))


def test_sigma_rearrange_requires_matching_carrier():
    carrier, sigma = disc_field(16)
    other = Carrier.disc_spiral(1.0, 17)
    with pytest.raises(CarrierMismatchError):
        sigma_rearrange(AtomicFunction.zeros(other), sigma)


def test_family_and_domain_must_agree():
    rectangle = Carrier.rectangle_grid(1.0, 1.0, 4, 4)
    disc = Carrier.disc_spiral(1.0, 16)
    with pytest.raises(SigmaFieldError):
        build_sigma_field(SigmaSpec.radius_squared(), rectangle)
    with pytest.raises(SigmaFieldError):
        build_sigma_field(SigmaSpec.coord_x2(), disc)
    with pytest.raises(SigmaFieldError):
        build_sigma_field(SigmaSpec.power_law(1.0, 3), disc)
    with pytest.raises(SigmaFieldError):
        build_sigma_field(SigmaSpec.empirical(np.zeros(3)), disc)


def test_analytic_b_continues_past_domain_measure():
    _, sigma = disc_field(64)
    assert sigma.kind is SigmaKind.RADIUS_SQUARED
    assert float(sigma.b(2.0 * math.pi)) == pytest.approx(2.0)
    assert float(sigma.a(0.5)) == pytest.approx(0.5 * math.pi)


def test_empirical_b_keeps_last_value():
    carrier = Carrier.rectangle_grid(1.0, 1.0, 4, 1)
    sigma = build_sigma_field(SigmaSpec.empirical(np.array([3.0, 1.0, 2.0, 0.5])), carrier)
    assert sigma.b(0.0) == 0.5
    assert sigma.b(0.3) == 1.0
    assert sigma.b(5.0) == 3.0
    assert sigma.a(2.0) == 0.5


@pytest.mark.parametrize(
    "spec_factory",
    [
        lambda carrier: SigmaSpec.radius_squared(),
        lambda carrier: SigmaSpec.power_law(0.5, 2),
        lambda carrier: SigmaSpec.empirical(np.sin(7.0 * carrier.positions[:, 0]) + carrier.positions[:, 1]),
    ],
)
def test_lemma21_identities_hold(spec_factory):
    carrier = Carrier.disc_spiral(1.0, 300)
    sigma = build_sigma_field(spec_factory(carrier), carrier)
    report = lemma21_report(sigma)
    assert report["inverse_exact_at_knots"]
    assert report["equivalence_on_knot_pairs"]
    assert report["max_jump"] <= report["max_weight"] * (1 + 1e-12)


def test_sigma_csv_rebuilds_an_empirical_field(tmp_path):
    carrier, sigma = disc_field(32)
    path = write_sigma_csv(sigma, tmp_path / "sigma.csv")
    loaded = read_sigma_csv(path, carrier)
    assert loaded.kind is SigmaKind.EMPIRICAL
    assert np.array_equal(loaded.values, sigma.values)

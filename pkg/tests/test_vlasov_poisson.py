import math

import numpy as np
import pytest

from rearrangement.convexity import vp_k_bound
from rearrangement.random_functions import Family, TrialStreams, random_function
from rearrangement.vlasov_poisson import (
    VlasovPoissonError,
    a_e0,
    a_e0_crosscheck,
    a_e0_curve,
    build_steady_vp,
    certify_vp_global,
    certify_vp_z2,
    fixed_point_defect,
    hamiltonian_vp,
    interpolation_diag,
    polytrope_density_constant,
    polytrope_density_quadrature,
    shell_potential,
    vp_energy_identity,
)


@pytest.fixture(scope="module")
def polytrope():
    return build_steady_vp(1.5, 1.0, -1.0, n_r=128, n_v=128, r_grid_size=512, table_size=256)


@pytest.mark.parametrize("k", [1.5, 2.0, 3.0])
@pytest.mark.filterwarnings("error")
def test_density_constant_matches_velocity_integral(k):
    assert polytrope_density_constant(k) == pytest.approx(polytrope_density_quadrature(k), rel=1e-8)


def test_invalid_parameters_are_reported_together():
    with pytest.raises(VlasovPoissonError) as excinfo:
        build_steady_vp(4.0, 0.0, 1.0)
    message = str(excinfo.value)
    assert "k + 3/2" in message
    assert "kappa" in message
    assert "e0" in message
    with pytest.raises(VlasovPoissonError):
        build_steady_vp(1.0)


def test_potential_is_self_consistent(polytrope):
    potential = polytrope.potential
    assert polytrope.poisson_residual < 1e-4
    assert abs(polytrope.shooting_mismatch) < 1e-6
    assert potential.phi_at_zero < polytrope.e_cut < 0
    assert potential(potential.support_radius) == pytest.approx(polytrope.e_cut, abs=1e-9)
    assert potential(2.0 * potential.support_radius) == pytest.approx(polytrope.e_cut / 2.0, rel=1e-6)
    r = np.linspace(0.0, 2.0 * potential.support_radius, 200)
    assert np.all(np.diff(potential(r)) >= -1e-12)


def test_steady_state_is_its_own_energy_rearrangement(polytrope):
    assert fixed_point_defect(polytrope) <= 1e-6


def test_a_e0_against_atom_counts(polytrope):
    report = a_e0_crosscheck(polytrope, percentiles=(0.5, 0.9))
    assert report["max_relative_error"] < 0.03
    assert report["a_at_zero"] == 0.0
    assert report["increasing"]
    assert report["convex"]
    assert a_e0(polytrope, 0.0) == 0.0
    with pytest.raises(VlasovPoissonError):
        a_e0(polytrope, -polytrope.potential.phi_at_zero)
    curve = a_e0_curve(polytrope)
    assert curve(polytrope.s_table[-1] + 1.0) == pytest.approx(polytrope.a_table[-1])


def test_explicit_bound_is_finite(polytrope):
    bound = vp_k_bound(polytrope)
    assert math.isfinite(bound)
    assert bound > 0
    assert polytrope.K.value <= bound * (1.0 + 1e-6)


def test_global_certificate_at_and_near_the_steady_state(polytrope):
    at_rest = certify_vp_global(polytrope.f0, polytrope)
    assert at_rest.lhs == 0.0
    assert at_rest.holds

    scaled = polytrope.f0.with_values(1.05 * polytrope.f0.values)
    certificate = certify_vp_global(scaled, polytrope)
    assert not certificate.violated
    assert certificate.components["rearranged_l1"] == pytest.approx(0.05 * polytrope.f0.integral(), rel=1e-9)


def test_z2_certificates_hold_for_shuffles(polytrope):
    streams = TrialStreams(21)
    for index in range(3):
        shuffled = random_function(
            streams.trial("vp-shuffle", index), polytrope.carrier, Family.EQUIMEASURABLE_SHUFFLE, base=polytrope.f0
        )
        certificate = certify_vp_z2(shuffled, polytrope)
        assert not certificate.violated, (index, certificate.slack)
        assert "not_equimeasurable" not in certificate.caveats


def test_energy_identity_for_random_phase_space_functions(polytrope):
    f = random_function(TrialStreams(4).trial("vp-identity", 0), polytrope.carrier)
    assert vp_energy_identity(f, polytrope) < 1e-8


def test_hamiltonian_is_quadratic_in_scaling(polytrope):
    f = polytrope.f0
    shells = shell_potential(f)
    field_energy = shells.field_energy
    assert shells.total_mass == pytest.approx(f.integral(), rel=1e-12)
    doubled = f.with_values(2.0 * f.values)
    assert hamiltonian_vp(doubled) - 2.0 * hamiltonian_vp(f) == pytest.approx(-field_energy, rel=1e-9)


def test_interpolation_ratio_is_scale_invariant(polytrope):
    base = interpolation_diag(polytrope.f0)
    scaled = interpolation_diag(polytrope.f0.with_values(3.0 * polytrope.f0.values))
    assert base.ratio > 0
    assert scaled.ratio == pytest.approx(base.ratio, rel=1e-9)
    assert set(base.to_dict()) == {"gradient_sq", "kinetic_moment", "l1", "linf", "bound_scale", "ratio"}

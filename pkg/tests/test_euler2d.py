import math

import numpy as np
import pytest

from rearrangement.euler2d import (
    DiscGreenKernel,
    EulerError,
    MomentumFunctionals,
    SteadyKind,
    StripPoisson,
    VorticityField,
    bessel_stream_oracle,
    build_psi0,
    certify_euler_domain,
    certify_euler_symmetric,
    disc_momentum_identity,
    energy_identity,
    evolve_strip,
    momentum_functionals,
    poisson_disc_radial,
    poisson_plane_radial,
    poisson_rect,
    psi0_curve,
    radial_steady_state,
    shear_steady_state,
)
from rearrangement.measure_core import Carrier
from rearrangement.random_functions import Family, TrialStreams, random_function


def shear(x2):
    return np.maximum(1.0 - x2, 0.0)


def paraboloid(r):
    return np.maximum(1.0 - r**2, 0.0)


def tent(psi):
    return np.maximum(1.0 - psi, 0.0)


def test_poisson_rect_inverts_first_sine_mode():
    carrier = Carrier.rectangle_grid(2.0, 1.0, 16, 16)
    omega = VorticityField.from_function(carrier, lambda x: np.sin(math.pi * x[:, 1]))

    flow = poisson_rect(omega)

    x2 = carrier.positions[:, 1].reshape(carrier.shape)
    assert np.allclose(flow.psi, np.sin(math.pi * x2) / math.pi**2, atol=1e-10)
    assert np.allclose(flow.u, -np.cos(math.pi * x2) / math.pi, atol=1e-10)
    assert np.allclose(flow.v, 0.0, atol=1e-12)


def test_poisson_rect_of_zero_vorticity_is_zero():
    carrier = Carrier.rectangle_grid(1.0, 1.0, 8, 8)
    flow = poisson_rect(VorticityField.from_grid(carrier, np.zeros((8, 8))))
    assert not flow.psi.any()
    assert not flow.u.any()


def test_strip_laplacian_inverts_the_poisson_solve():
    carrier = Carrier.rectangle_grid(2.0, 1.0, 12, 10)
    solver = StripPoisson(carrier)
    omega = np.random.default_rng(3).random(carrier.shape)
    assert np.allclose(solver.minus_laplacian(solver.solve(omega).psi), omega, atol=1e-10)


def test_radial_dirichlet_solve_of_uniform_vorticity():
    r = np.linspace(0.0, 1.0, 101)
    psi = poisson_disc_radial(r, np.ones_like(r), 1.0)
    assert np.allclose(psi, (1.0 - r**2) / 4.0, atol=1e-12)
    with pytest.raises(EulerError):
        poisson_disc_radial(r[1:], np.ones(100), 1.0)
    with pytest.raises(EulerError):
        poisson_disc_radial(r, np.ones_like(r), math.inf)


def test_whole_plane_radial_solve_decays_logarithmically():
    r = np.linspace(0.0, 2.0, 2001)
    psi = poisson_plane_radial(r, paraboloid(r))
    # outside the support only the enclosed mass 1/4 is felt
    assert psi[1000] == pytest.approx(0.0, abs=1e-6)
    assert psi[-1] == pytest.approx(-math.log(2.0) / 4.0, abs=1e-5)


def test_disc_momentum_of_paraboloid():
    q = radial_steady_state(paraboloid, 1.0, 1024).omega0
    A, half = disc_momentum_identity(q)
    assert A == pytest.approx(math.pi / 6.0, rel=5e-3)
    assert half == pytest.approx(math.pi / 6.0, rel=5e-3)
    assert A == pytest.approx(half, rel=5e-3)


def test_disc_energy_matches_half_gradient_norm():
    ss = radial_steady_state(paraboloid, 1.0, 1024)
    functionals = momentum_functionals(ss.field)
    assert functionals.H == pytest.approx(11.0 * math.pi / 384.0, rel=5e-2)
    assert functionals.half_gradient == pytest.approx(functionals.H, rel=1e-6)
    assert functionals.energy_consistent


def test_energy_mismatch_is_flagged():
    functionals = MomentumFunctionals(A=0.0, B=0.0, H=1.0, half_gradient=1.0 + 1e-4)
    assert functionals.energy_mismatch == pytest.approx(1e-4)
    assert not functionals.energy_consistent


def test_shear_momentum_and_energy():
    ss = shear_steady_state(shear, 1.0, 1.0, 16, 64)
    functionals = momentum_functionals(ss.field)
    assert functionals.B == pytest.approx(1.0 / 6.0, rel=1e-3)
    assert functionals.H > 0
    assert functionals.half_gradient == pytest.approx(functionals.H, rel=1e-6)
    assert functionals.energy_consistent


def test_steady_state_profiles_are_checked():
    with pytest.raises(EulerError):
        shear_steady_state(lambda x2: x2, 1.0, 1.0, 4, 4)
    with pytest.raises(EulerError):
        radial_steady_state(lambda r: r - 1.0, 1.0, 16)


def test_build_psi0_matches_bessel_solution_on_disc():
    carrier = Carrier.disc_spiral(1.0, 1024)
    ss = build_psi0(tent, carrier)

    assert ss.kind is SteadyKind.STREAM_MONOTONE
    assert ss.residual_history[-1] < 1e-8
    assert np.array_equal(ss.omega0.values, tent(ss.psi0))
    assert np.max(np.abs(DiscGreenKernel(carrier).minus_laplacian(ss.psi0) - ss.omega0.values)) < 1e-8
    assert np.max(np.abs(ss.psi0 - bessel_stream_oracle(carrier.radii()))) < 1e-2
    assert bessel_stream_oracle(np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-15)
    assert psi0_curve(ss).strictly_convex


def test_build_psi0_on_the_strip_stops_on_the_laplacian_residual():
    carrier = Carrier.rectangle_grid(1.0, 1.0, 16, 16)
    ss = build_psi0(tent, carrier)

    psi = ss.psi0.reshape(carrier.shape)
    omega = ss.omega0.values.reshape(carrier.shape)
    assert ss.residual_history[-1] < 1e-8
    assert np.max(np.abs(StripPoisson(carrier).minus_laplacian(psi) - omega)) == pytest.approx(ss.residual_history[-1])
    assert np.max(np.abs(poisson_rect(VorticityField(ss.omega0)).psi - psi)) < 1e-8
    assert ss.fixed_point_residual is not None


def test_build_psi0_rejects_vanishing_profile_and_other_domains():
    carrier = Carrier.disc_spiral(1.0, 32)
    with pytest.raises(EulerError):
        build_psi0(lambda psi: np.maximum(-psi, 0.0), carrier)
    with pytest.raises(EulerError):
        build_psi0(tent, Carrier.phase_space_shells(1.0, 1.0, 4, 4))


def test_symmetric_certificate_is_tight_at_the_steady_state():
    ss = radial_steady_state(paraboloid, 1.0, 256)
    certificate = certify_euler_symmetric(ss.omega0, ss.omega0, ss)
    assert certificate.lhs == pytest.approx(0.0, abs=1e-24)
    assert certificate.rhs == pytest.approx(0.0, abs=1e-12)
    assert certificate.holds


def test_symmetric_certificates_hold_for_perturbations():
    streams = TrialStreams(17)
    disc = radial_steady_state(paraboloid, 1.0, 256)
    strip = shear_steady_state(shear, 1.0, 1.0, 16, 16)
    for index in range(6):
        for ss, radial in ((disc, True), (strip, False)):
            omega = random_function(
                streams.trial(f"euler-{ss.kind.value}", index),
                ss.omega0.carrier,
                Family.ADDITIVE_PERTURBATION,
                base=ss.omega0,
                amplitude=0.2,
                radial=radial,
            )
            certificate = certify_euler_symmetric(omega, omega, ss)
            assert not certificate.violated, (ss.kind, index, certificate.slack)


def test_symmetric_certificate_rejects_stream_monotone_state():
    ss = build_psi0(tent, Carrier.disc_spiral(1.0, 64))
    with pytest.raises(EulerError):
        certify_euler_symmetric(ss.omega0, ss.omega0, ss)


def test_domain_certificates_hold_for_shuffles():
    ss = build_psi0(tent, Carrier.disc_spiral(1.0, 256))
    streams = TrialStreams(3)
    for index in range(8):
        omega = random_function(
            streams.trial("shuffle", index), ss.omega0.carrier, Family.EQUIMEASURABLE_SHUFFLE, base=ss.omega0
        )
        certificate = certify_euler_domain(omega, ss)
        assert not certificate.violated, (index, certificate.slack)
        assert certificate.components["rearranged_l1"] == 0.0


def test_energy_identity_on_both_geometries():
    streams = TrialStreams(5)
    disc = build_psi0(tent, Carrier.disc_spiral(1.0, 128))
    strip = shear_steady_state(shear, 1.0, 1.0, 16, 16)
    for ss in (disc, strip):
        omega = random_function(streams.trial("identity", ss.omega0.carrier.size), ss.omega0.carrier)
        assert energy_identity(omega, ss) < 1e-6


def test_shear_steady_state_does_not_move():
    ss = shear_steady_state(shear, 1.0, 1.0, 32, 32)
    trajectory = evolve_strip(ss.field, 0.2, samples=2)

    assert len(trajectory.samples) == 3
    assert trajectory.samples[-1].t == pytest.approx(0.2)
    scale = ss.omega0.max_value()
    for sample in trajectory.samples:
        assert np.max(np.abs(sample.field.values - ss.omega0.values)) <= 1e-8 * scale
        assert sample.mass_drift < 1e-10
        assert sample.momentum_drift < 1e-10
    assert trajectory.max_cfl <= 0.5 + 1e-12


def test_perturbed_shear_keeps_mass_and_momentum_to_t1():
    ss = shear_steady_state(shear, 1.0, 1.0, 32, 32)
    x1, x2 = ss.omega0.carrier.positions.T
    bump = 5e-3 * np.sin(2.0 * np.pi * x1) * np.sin(np.pi * x2)
    trajectory = evolve_strip(VorticityField(ss.omega0.with_values(ss.omega0.values + bump)), 1.0, samples=4)

    assert trajectory.samples[-1].t == pytest.approx(1.0)
    for sample in trajectory.samples:
        assert sample.mass_drift < 1e-6
        assert sample.momentum_drift < 1e-6
    # the perturbation is actually transported
    assert np.max(np.abs(trajectory.samples[-1].field.values - ss.omega0.values - bump)) > 1e-4


def test_evolve_strip_refuses_large_steps():
    ss = shear_steady_state(shear, 1.0, 1.0, 16, 16)
    with pytest.raises(EulerError):
        evolve_strip(ss.field, 1.0, dt=1.0, samples=1)

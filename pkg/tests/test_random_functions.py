import numpy as np
import pytest

from rearrangement.measure_core import AtomicFunction, Carrier, mu_of
from rearrangement.random_functions import (
    Family,
    RandomFunctionError,
    TrialStreams,
    bump_values,
    random_function,
)


def test_trial_streams_are_reproducible():
    first = TrialStreams(42).trial("sweep", 3).random(8)
    second = TrialStreams(42).trial("sweep", 3).random(8)
    assert np.array_equal(first, second)


def test_streams_differ_across_seeds_tags_and_trials():
    draws = {
        TrialStreams(seed).trial(tag, index).random(4).tobytes()
        for seed in (0, 1)
        for tag in ("a", "b")
        for index in range(20)
    }
    assert len(draws) == 80


def test_random_functions_are_nonnegative_on_every_domain():
    streams = TrialStreams(8)
    carriers = [
        Carrier.disc_spiral(1.0, 800),
        Carrier.rectangle_grid(2.0, 1.0, 20, 20),
        Carrier.phase_space_shells(1.0, 1.0, 10, 10),
        Carrier.ball_shells(1.0, 50, 3),
    ]
    for index, carrier in enumerate(carriers):
        f = random_function(streams.trial("domains", index), carrier)
        assert f.values.shape == (carrier.size,)
        assert np.all(np.isfinite(f.values))
        assert f.values.min() >= 0


def test_same_stream_gives_same_values():
    carrier = Carrier.rectangle_grid(1.0, 1.0, 8, 8)
    a = bump_values(TrialStreams(5).trial("again", 0), carrier)
    b = bump_values(TrialStreams(5).trial("again", 0), carrier)
    assert np.array_equal(a, b)


def test_radial_bumps_depend_only_on_radius():
    disc = Carrier.disc_spiral(1.0, 4).domain
    ring = Carrier.from_arrays(disc, [[0.5, 0.0], [0.0, 0.5], [-0.5, 0.0], [0.0, -0.5]], [0.1] * 4)
    for index in range(10):
        values = bump_values(TrialStreams(2).trial("radial", index), ring, radial=True)
        assert np.all(values == values[0])


def test_equimeasurable_shuffle_preserves_distribution():
    carrier = Carrier.disc_spiral(1.0, 300)
    streams = TrialStreams(13)
    base = random_function(streams.trial("base", 0), carrier)
    shuffled = random_function(streams.trial("shuffle", 0), carrier, Family.EQUIMEASURABLE_SHUFFLE, base=base)
    assert mu_of(shuffled).same_as(mu_of(base))
    assert not np.array_equal(shuffled.values, base.values)


def test_zero_amplitude_returns_base_values():
    carrier = Carrier.rectangle_grid(1.0, 1.0, 6, 6)
    base = random_function(TrialStreams(1).trial("base", 0), carrier)
    same = random_function(
        TrialStreams(1).trial("perturb", 0), carrier, Family.ADDITIVE_PERTURBATION, base=base, amplitude=0.0
    )
    assert np.array_equal(same.values, base.values)


def test_additive_perturbation_is_scaled_to_base_sup():
    carrier = Carrier.rectangle_grid(1.0, 1.0, 20, 20)
    base = AtomicFunction(carrier, np.ones(400))
    perturbed = random_function(
        TrialStreams(1).trial("perturb", 1), carrier, Family.ADDITIVE_PERTURBATION, base=base, amplitude=0.1
    )
    assert perturbed.values.min() >= 1.0
    assert perturbed.max_value() == pytest.approx(1.1)


def test_family_arguments_are_checked():
    carrier = Carrier.disc_spiral(1.0, 16)
    rng = TrialStreams(0).trial("errors", 0)
    with pytest.raises(RandomFunctionError):
        random_function(rng, carrier, Family.EQUIMEASURABLE_SHUFFLE)
    base = AtomicFunction.zeros(Carrier.disc_spiral(1.0, 17))
    with pytest.raises(RandomFunctionError):
        random_function(rng, carrier, Family.ADDITIVE_PERTURBATION, base=base, amplitude=0.1)
    with pytest.raises(RandomFunctionError):
        random_function(rng, carrier, Family.ADDITIVE_PERTURBATION, base=AtomicFunction.zeros(carrier), amplitude=-1)

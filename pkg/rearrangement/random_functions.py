"""Seeded random test functions on carriers.

Every trial draws from its own named substream of a master seed, so a trial
can be replayed alone (for instance at a finer atom resolution) and produce
the same continuous function.
"""
from __future__ import annotations

import hashlib
import math
from enum import Enum
from typing import Optional

import numpy as np

from rearrangement.measure_core import AtomicFunction, Carrier, Domain, DomainKind


class RandomFunctionError(RuntimeError):
    pass


class Family(str, Enum):
    PIECEWISE_BUMPS = "piecewise_bumps"
    EQUIMEASURABLE_SHUFFLE = "equimeasurable_shuffle"
    ADDITIVE_PERTURBATION = "additive_perturbation"


class TrialStreams:
    """Counter-based generators keyed by ``sha256(f"{seed}:{tag}")``."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def split(self, tag: str) -> np.random.Generator:
        digest = hashlib.sha256(f"{self.seed}:{tag}".encode("utf-8")).digest()
        key = int.from_bytes(digest[:16], byteorder="big")
        return np.random.Generator(np.random.Philox(key=key))

    def trial(self, tag: str, index: int) -> np.random.Generator:
        return self.split(f"{tag}/{index}")


def _scale(domain: Domain) -> float:
    if domain.kind is DomainKind.RECTANGLE:
        return max(domain.L1, domain.L2)
    if domain.kind is DomainKind.PHASE_SPACE_RADIAL:
        return max(domain.r_max, domain.v_max)
    return domain.radius


def _draw_centre(rng: np.random.Generator, domain: Domain) -> np.ndarray:
    if domain.kind is DomainKind.DISC:
        radius = domain.radius * math.sqrt(rng.random())
        angle = 2.0 * math.pi * rng.random()
        return np.array([radius * math.cos(angle), radius * math.sin(angle)])
    if domain.kind is DomainKind.RECTANGLE:
        return np.array([domain.L1 * rng.random(), domain.L2 * rng.random()])
    if domain.kind is DomainKind.PHASE_SPACE_RADIAL:
        return np.array([domain.r_max * rng.random(), domain.v_max * rng.random()])
    centre = np.zeros(domain.dim)
    centre[0] = domain.radius * rng.random()
    return centre


def bump_values(
    rng: np.random.Generator,
    carrier: Carrier,
    *,
    max_bumps: int = 6,
    radial: bool = False,
) -> np.ndarray:
    """Sum of compactly supported bumps with heavy-tailed heights.

    All parameters are drawn before the carrier is touched, so the same
    stream gives the same continuous function on any carrier of the domain.
    ``radial=True`` centres shells on ``|x|`` instead of points.
    """
    domain = carrier.domain
    scale = _scale(domain)
    n_bumps = int(rng.integers(1, max_bumps + 1))
    if radial:
        centres = list(scale * rng.random(size=n_bumps))
    else:
        centres = [_draw_centre(rng, domain) for _ in range(n_bumps)]
    widths = scale * rng.uniform(0.1, 0.6, size=n_bumps)
    heights = 1.0 + rng.pareto(1.5, size=n_bumps)
    powers = rng.integers(1, 3, size=n_bumps)
    levels = int(rng.integers(0, 6))
    values = np.zeros(carrier.size)
    radii = carrier.radii() if radial else None
    for centre, width, height, power in zip(centres, widths, heights, powers):
        if radial:
            distance2 = (radii - centre) ** 2
        else:
            distance2 = np.sum((carrier.positions - centre) ** 2, axis=1)
        values += height * np.maximum(0.0, 1.0 - distance2 / width**2) ** int(power)
    if levels >= 2 and values.max() > 0:
        # plateaus of equal value
        top = values.max()
        values = np.floor(values / top * levels) * (top / levels)
    return values


def random_function(
    rng: np.random.Generator,
    carrier: Carrier,
    family: Family = Family.PIECEWISE_BUMPS,
    *,
    base: Optional[AtomicFunction] = None,
    amplitude: float = 0.0,
    max_bumps: int = 6,
    radial: bool = False,
) -> AtomicFunction:
    family = Family(family)
    if family is Family.PIECEWISE_BUMPS:
        return AtomicFunction(carrier, bump_values(rng, carrier, max_bumps=max_bumps, radial=radial))
    if base is None:
        raise RandomFunctionError(f"{family.value} needs a base function")
    if not base.carrier.matches(carrier):
        raise RandomFunctionError("The base function lives on another carrier")
    if family is Family.EQUIMEASURABLE_SHUFFLE:
        values = base.values.copy()
        # permute only among atoms of equal weight so the multiset is exact
        for weight in np.unique(carrier.weights):
            group = np.flatnonzero(carrier.weights == weight)
            values[group] = values[rng.permutation(group)]
        return base.with_values(values)
    if amplitude < 0:
        raise RandomFunctionError(f"Perturbation amplitude must be nonnegative, got {amplitude}")
    if amplitude == 0:
        return base.with_values(base.values)
    bumps = bump_values(rng, carrier, max_bumps=max_bumps, radial=radial)
    peak = bumps.max()
    if peak > 0:
        bumps = bumps / peak * base.max_value()
    return base.with_values(base.values + amplitude * bumps)


__all__ = ["Family", "RandomFunctionError", "TrialStreams", "bump_values", "random_function"]

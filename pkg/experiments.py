"""Experiment configuration, dispatch and reports.

A run is fully determined by its config snapshot (experiment, seed, trials,
params, tolerances); the snapshot digest names the run directory, so a rerun
overwrites byte-identical artifacts.
"""
from __future__ import annotations

import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import (
    CFL_MAX,
    PICARD_MAX_ITER,
    PICARD_RELAXATION,
    get_output_root,
    load_presets,
)
from rearrangement.certify import (
    Certificate,
    InequalityId,
    Sense,
    Status,
    certify_corollary1,
    certify_hl_classic,
    certify_hl_theta,
    certify_refined,
    certify_remark3,
    certify_thm1,
)
from rearrangement.convexity import ConvexCurve, b_sigma_curve
from rearrangement.euler2d import (
    VorticityField,
    build_psi0,
    certify_euler_domain,
    certify_euler_symmetric,
    disc_momentum_identity,
    evolve_strip,
    momentum_functionals,
    psi0_curve,
    radial_steady_state,
    shear_steady_state,
)
from rearrangement.measure_core import AtomicFunction, Carrier
from rearrangement.random_functions import Family, TrialStreams, bump_values, random_function
from rearrangement.run_index import RunRecord
from rearrangement.sigma_fields import SigmaField, SigmaSpec, build_sigma_field
from rearrangement.vlasov_poisson import (
    a_e0_crosscheck,
    build_steady_vp,
    certify_vp_global,
    certify_vp_z2,
    fixed_point_defect,
    hamiltonian_vp,
    interpolation_diag,
)
from run_store import RunStore

logger = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ExperimentKind(str, Enum):
    CERTIFY_SWEEP = "certify_sweep"
    COROLLARY1_SWEEP = "corollary1_sweep"
    EULER_STRIP_RUN = "euler_strip_run"
    EULER_DISC_CERTIFY = "euler_disc_certify"
    EULER_DOMAIN_CERTIFY = "euler_domain_certify"
    VP_BUILD_AND_CERTIFY = "vp_build_and_certify"


SWEEP_FAMILIES = ("disc_r2", "strip_x2", "power_law", "empirical")
SWEEP_INEQUALITIES = (
    InequalityId.THM1_INEQ1.value,
    InequalityId.THM1_INEQ2.value,
    InequalityId.REMARK3_INEQ11.value,
    InequalityId.HL_CLASSIC.value,
    InequalityId.HL_THETA.value,
)
TRAJECTORY_EXPERIMENTS = {ExperimentKind.EULER_STRIP_RUN.value}
TOLERANCE_KEYS = ("cert_rel_tol", "picard_tol", "shooting_tol")
SEED_LIMIT = 2**64


# -- validation rules ------------------------------------------------------------------------


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _positive(value: Any) -> bool:
    return _is_number(value) and value > 0


def _count(minimum: int) -> Callable[[Any], bool]:
    return lambda value: isinstance(value, int) and not isinstance(value, bool) and value >= minimum


def _subset(options: Sequence[str]) -> Callable[[Any], bool]:
    return lambda value: isinstance(value, list) and bool(value) and all(item in options for item in value)


def _exponents(value: Any) -> bool:
    return isinstance(value, list) and bool(value) and all(_is_number(m) and 0 < m <= 2 for m in value)


def _unit_interval(value: Any) -> bool:
    return _is_number(value) and 0 < value <= 1


def _nonnegative(value: Any) -> bool:
    return _is_number(value) and value >= 0


def _boolean(value: Any) -> bool:
    return isinstance(value, bool)


def _optional_positive(value: Any) -> bool:
    return value is None or _positive(value)


Rule = Tuple[Any, Callable[[Any], bool], str]

_RULES: Dict[str, Dict[str, Rule]] = {
    ExperimentKind.CERTIFY_SWEEP.value: {
        "families": (list(SWEEP_FAMILIES), _subset(SWEEP_FAMILIES), f"a non-empty list drawn from {SWEEP_FAMILIES}"),
        "inequalities": (
            list(SWEEP_INEQUALITIES),
            _subset(SWEEP_INEQUALITIES),
            f"a non-empty list drawn from {SWEEP_INEQUALITIES}",
        ),
        "radius": (1.0, _positive, "a positive number"),
        "n_atoms": (1024, _count(2), "an integer >= 2"),
        "L1": (1.0, _positive, "a positive number"),
        "L2": (1.0, _positive, "a positive number"),
        "grid": (32, _count(2), "an integer >= 2"),
        "m": (1.0, lambda m: _is_number(m) and 0 < m <= 2, "a number in (0, 2]"),
        "replay": (True, _boolean, "a boolean"),
        "histogram_bins": (20, _count(1), "an integer >= 1"),
    },
    ExperimentKind.COROLLARY1_SWEEP.value: {
        "radius": (1.0, _positive, "a positive number"),
        "n_atoms": (1024, _count(2), "an integer >= 2"),
        "exponents": ([0.5, 1.0, 2.0], _exponents, "a non-empty list of numbers in (0, 2]"),
        "histogram_bins": (20, _count(1), "an integer >= 1"),
    },
    ExperimentKind.EULER_STRIP_RUN.value: {
        "L1": (1.0, _positive, "a positive number"),
        "L2": (1.0, _positive, "a positive number"),
        "grid": (64, _count(4), "an integer >= 4"),
        "T": (1.0, _positive, "a positive number"),
        "samples": (10, _count(1), "an integer >= 1"),
        "amplitude": (0.05, _nonnegative, "a nonnegative number"),
        "cfl_target": (0.5, lambda c: _positive(c) and c <= CFL_MAX, f"a number in (0, {CFL_MAX}]"),
        "dt": (None, _optional_positive, "null or a positive number"),
        "check_steady": (True, _boolean, "a boolean"),
    },
    ExperimentKind.EULER_DISC_CERTIFY.value: {
        "radius": (1.0, _positive, "a positive number"),
        "n_atoms": (2048, _count(2), "an integer >= 2"),
        "amplitude": (0.1, _nonnegative, "a nonnegative number"),
        "histogram_bins": (20, _count(1), "an integer >= 1"),
    },
    ExperimentKind.EULER_DOMAIN_CERTIFY.value: {
        "radius": (1.0, _positive, "a positive number"),
        "n_atoms": (1024, _count(2), "an integer >= 2"),
        "relaxation": (PICARD_RELAXATION, _unit_interval, "a number in (0, 1]"),
        "max_iter": (PICARD_MAX_ITER, _count(1), "an integer >= 1"),
        "histogram_bins": (20, _count(1), "an integer >= 1"),
    },
    ExperimentKind.VP_BUILD_AND_CERTIFY.value: {
        "k": (1.5, lambda k: _is_number(k) and 1 < k < 3.5, "a number in (1, 3.5)"),
        "kappa": (1.0, _positive, "a positive number"),
        "e0": (-1.0, lambda e: _is_number(e) and e < 0, "a negative number"),
        "n_r": (256, _count(2), "an integer >= 2"),
        "n_v": (256, _count(2), "an integer >= 2"),
        "r_grid_size": (2048, _count(16), "an integer >= 16"),
        "margin": (1.25, lambda m: _is_number(m) and m > 1, "a number above 1"),
        "table_size": (1024, _count(16), "an integer >= 16"),
        "amplitude": (0.05, _nonnegative, "a nonnegative number"),
        "histogram_bins": (20, _count(1), "an integer >= 1"),
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    trials: int = 0
    params: Dict[str, Any] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    output_dir: Optional[str] = None

    def validate(self) -> None:
        problems: List[str] = []
        if self.experiment not in _RULES:
            problems.append(
                f"experiment: unknown experiment {self.experiment!r}; expected one of {sorted(_RULES)}"
            )
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < SEED_LIMIT:
            problems.append(f"seed: must be an integer in [0, 2**64), got {self.seed!r}")
        if not _count(0)(self.trials):
            problems.append(f"trials: must be a nonnegative integer, got {self.trials!r}")
        rules = _RULES.get(self.experiment, {})
        for key in sorted(self.params):
            if rules and key not in rules:
                problems.append(f"params.{key}: unknown parameter for {self.experiment}")
        for key, (_, check, description) in rules.items():
            if key in self.params and not check(self.params[key]):
                problems.append(f"params.{key}: must be {description}, got {self.params[key]!r}")
        if self.experiment == ExperimentKind.VP_BUILD_AND_CERTIFY.value:
            k = self.params.get("k")
            if _is_number(k) and not k + 1.5 < 5:
                problems.append(f"params.k: k + 3/2 must stay below 5, got {k!r}")
        for key in sorted(self.tolerances):
            if key not in TOLERANCE_KEYS:
                problems.append(f"tolerances.{key}: unknown tolerance; expected one of {TOLERANCE_KEYS}")
            elif not _positive(self.tolerances[key]):
                problems.append(f"tolerances.{key}: must be a positive number, got {self.tolerances[key]!r}")
        if problems:
            raise ExperimentError(problems)

    def snapshot(self) -> Dict[str, Any]:
        """Everything that determines the artifacts; the output directory is not part of it."""
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "trials": self.trials,
            "params": dict(sorted(self.params.items())),
            "tolerances": dict(sorted(self.tolerances.items())),
        }

    @property
    def run_id(self) -> str:
        return RunStore.run_id(self.snapshot())

    def tolerance(self, key: str) -> Optional[float]:
        value = self.tolerances.get(key)
        return float(value) if value is not None else None


def resolve_config(
    payload: Dict[str, Any],
    *,
    presets: Optional[Dict[str, Dict[str, Any]]] = None,
    experiment: Optional[str] = None,
) -> ExperimentConfig:
    """Layer code defaults < preset < JSON payload, then validate."""
    problems: List[str] = []
    known = {"experiment", "seed", "trials", "params", "tolerances", "output_dir"}
    for key in sorted(set(payload) - known):
        problems.append(f"{key}: unknown config field")
    kind = payload.get("experiment", experiment)
    if experiment is not None and kind != experiment:
        problems.append(f"experiment: this command runs {experiment!r}, config asks for {kind!r}")
    presets = load_presets() if presets is None else presets
    preset = presets.get(kind, {}) if isinstance(kind, str) else {}
    if not isinstance(preset, dict):
        problems.append(f"preset {kind!r} must be a mapping")
        preset = {}
    for name, section in (("params", payload.get("params")), ("tolerances", payload.get("tolerances"))):
        if section is not None and not isinstance(section, dict):
            problems.append(f"{name}: must be a mapping")
    if problems:
        raise ExperimentError(problems)

    defaults = {key: rule[0] for key, rule in _RULES.get(kind, {}).items()}
    params = {**defaults, **(preset.get("params") or {}), **(payload.get("params") or {})}
    tolerances = {**(preset.get("tolerances") or {}), **(payload.get("tolerances") or {})}
    config = ExperimentConfig(
        experiment=kind,
        seed=payload.get("seed", preset.get("seed", 0)),
        trials=payload.get("trials", preset.get("trials", 0)),
        params=params,
        tolerances=tolerances,
        output_dir=payload.get("output_dir", preset.get("output_dir")),
    )
    config.validate()
    return config


def resolve_output_root(configured: Optional[str], cli_out: Optional[Path] = None) -> Path:
    if cli_out is not None:
        return Path(cli_out)
    if os.getenv("RLAB_OUT"):
        return get_output_root()
    if configured:
        return Path(configured)
    return get_output_root()


# -- helpers ---------------------------------------------------------------------------------


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _retolerate(certificate: Certificate, tol: Optional[float]) -> Certificate:
    if tol is None or certificate.status == Status.INCONCLUSIVE.value:
        return certificate
    return Certificate.evaluate(
        InequalityId(certificate.inequality_id),
        certificate.lhs,
        certificate.rhs,
        sense=Sense(certificate.sense),
        components=certificate.components,
        caveats=certificate.caveats,
        tol=tol,
    )


def _tag(certificate: Certificate, **labels: Any) -> Certificate:
    certificate.components.update(labels)
    return certificate


@dataclass
class _Outcome:
    certificates: List[Certificate] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)


# -- certify_sweep ---------------------------------------------------------------------------


@dataclass
class _FamilySetup:
    name: str
    carrier: Carrier
    sigma: SigmaField
    curve: ConvexCurve


def _family_setup(name: str, params: Dict[str, Any], streams: TrialStreams, *, refine: int = 1) -> _FamilySetup:
    if name in ("disc_r2", "power_law"):
        carrier = Carrier.disc_spiral(params["radius"], params["n_atoms"] * refine)
        spec = SigmaSpec.radius_squared() if name == "disc_r2" else SigmaSpec.power_law(params["m"], 2)
    else:
        L1, L2 = params["L1"], params["L2"]
        carrier = Carrier.rectangle_grid(L1, L2, params["grid"] * refine, params["grid"])
        if name == "strip_x2":
            spec = SigmaSpec.coord_x2()
        else:
            bumps = bump_values(streams.split("empirical/sigma"), carrier)
            # irrational tilt separates the grid rows and columns
            tilt = carrier.positions[:, 1] / L2 + carrier.positions[:, 0] / (1000.0 * math.pi * L1)
            spec = SigmaSpec.empirical(bumps + tilt)
    sigma = build_sigma_field(spec, carrier)
    return _FamilySetup(name=name, carrier=carrier, sigma=sigma, curve=b_sigma_curve(sigma))


def _trial_pair(streams: TrialStreams, family: str, index: int, carrier: Carrier) -> Tuple[AtomicFunction, AtomicFunction]:
    rng = streams.trial(family, index)
    f = random_function(rng, carrier, Family.PIECEWISE_BUMPS)
    q = random_function(rng, carrier, Family.PIECEWISE_BUMPS)
    return f, q


def _certify_pair(inequality: str, f: AtomicFunction, q: AtomicFunction, setup: _FamilySetup) -> Certificate:
    if inequality == InequalityId.THM1_INEQ1.value:
        return certify_thm1(f, q, setup.sigma, curve=setup.curve)
    if inequality == InequalityId.THM1_INEQ2.value:
        return certify_refined(f, setup.sigma, curve=setup.curve)
    if inequality == InequalityId.REMARK3_INEQ11.value:
        return certify_remark3(f, q, setup.sigma, curve=setup.curve)
    if inequality == InequalityId.HL_CLASSIC.value:
        return certify_hl_classic(f, q)
    if inequality == InequalityId.HL_THETA.value:
        return certify_hl_theta(f, setup.sigma)
    raise ExperimentError([f"params.inequalities: unsupported inequality {inequality!r}"])


def _run_certify_sweep(config: ExperimentConfig, store: RunStore, run_id: str, streams: TrialStreams) -> _Outcome:
    params = config.params
    tol = config.tolerance("cert_rel_tol")
    outcome = _Outcome()
    replays = 0
    for family in params["families"]:
        setup = _family_setup(family, params, streams)
        refined: Optional[_FamilySetup] = None
        print(f"🧮 {family}: {config.trials} trials on {setup.carrier.size} atoms")
        for index in range(config.trials):
            f, q = _trial_pair(streams, family, index, setup.carrier)
            for inequality in params["inequalities"]:
                certificate = _retolerate(_certify_pair(inequality, f, q, setup), tol)
                if certificate.violated and params["replay"]:
                    replays += 1
                    if refined is None:
                        refined = _family_setup(family, params, streams, refine=2)
                    f2, q2 = _trial_pair(streams, family, index, refined.carrier)
                    replay = _retolerate(_certify_pair(inequality, f2, q2, refined), tol)
                    certificate.components["refined_slack"] = replay.slack
                    if not replay.violated:
                        logger.warning(
                            "%s trial %d of %s did not reproduce at %d atoms",
                            inequality,
                            index,
                            family,
                            refined.carrier.size,
                        )
                        certificate.mark_inconclusive("not_reproduced_at_refinement")
                outcome.certificates.append(_tag(certificate, family=family, trial=index))
    outcome.summary = {"families": list(params["families"]), "replays": replays}
    return outcome


# -- corollary1_sweep ------------------------------------------------------------------------


def _run_corollary1_sweep(config: ExperimentConfig, store: RunStore, run_id: str, streams: TrialStreams) -> _Outcome:
    params = config.params
    tol = config.tolerance("cert_rel_tol")
    carrier = Carrier.disc_spiral(params["radius"], params["n_atoms"])
    outcome = _Outcome()
    for index in range(config.trials):
        u = random_function(streams.trial("corollary1", index), carrier, Family.PIECEWISE_BUMPS)
        for m in params["exponents"]:
            certificate = _retolerate(certify_corollary1(u, float(m)), tol)
            outcome.certificates.append(_tag(certificate, trial=index))
    outcome.summary = {"exponents": [float(m) for m in params["exponents"]]}
    return outcome


# -- euler2d ---------------------------------------------------------------------------------


def shear_profile(x2):
    return np.maximum(1.0 - np.asarray(x2, dtype=float), 0.0)


def radial_profile(r):
    return np.maximum(1.0 - np.asarray(r, dtype=float) ** 2, 0.0)


def stream_profile(psi):
    return np.maximum(1.0 - np.asarray(psi, dtype=float), 0.0)


def _trajectory_name(index: int) -> str:
    return "trajectory.csv" if index == 0 else f"trajectory_{index:03d}.csv"


def _run_euler_strip(config: ExperimentConfig, store: RunStore, run_id: str, streams: TrialStreams) -> _Outcome:
    params = config.params
    tol = config.tolerance("cert_rel_tol")
    n = params["grid"]
    steady = shear_steady_state(shear_profile, params["L1"], params["L2"], n, n)
    outcome = _Outcome()
    mass_drift = momentum_drift = clipped = cfl = 0.0
    steps = 0
    dt = math.nan
    for index in range(config.trials):
        omega_in = random_function(
            streams.trial("euler_strip", index),
            steady.field.carrier,
            Family.ADDITIVE_PERTURBATION,
            base=steady.omega0,
            amplitude=params["amplitude"],
        )
        print(f"🌊 Evolving perturbation {index + 1}/{config.trials} to T={params['T']}")
        trajectory = evolve_strip(
            VorticityField(omega_in),
            params["T"],
            params["dt"],
            samples=params["samples"],
            cfl_target=params["cfl_target"],
        )
        rows = []
        for sample in trajectory.samples:
            atoms = sample.field.atoms
            certificate = _retolerate(certify_euler_symmetric(omega_in, atoms, steady), tol)
            _tag(
                certificate,
                trial=index,
                t=sample.t,
                mass_drift=sample.mass_drift,
                momentum_drift=sample.momentum_drift,
                distribution_drift=sample.distribution_drift,
                clipped_mass=sample.clipped_mass,
            )
            outcome.certificates.append(certificate)
            rows.append(
                {
                    "t": sample.t,
                    "L1_dist_to_q": atoms.l1_distance(steady.omega0),
                    "lhs": certificate.lhs,
                    "rhs": certificate.rhs,
                    "slack": certificate.slack,
                    "mass_drift": sample.mass_drift,
                    "momentum_drift": sample.momentum_drift,
                }
            )
            mass_drift = max(mass_drift, sample.mass_drift)
            momentum_drift = max(momentum_drift, sample.momentum_drift)
            clipped = max(clipped, sample.clipped_mass)
        store.save_trajectory(run_id, rows, name=_trajectory_name(index))
        outcome.artifacts.append(_trajectory_name(index))
        cfl = max(cfl, trajectory.max_cfl)
        steps, dt = trajectory.steps, trajectory.dt

    functionals = momentum_functionals(steady.field)
    outcome.summary = {
        "B_steady": functionals.B,
        "H_steady": functionals.H,
        "energy_consistent": functionals.energy_consistent,
        "max_mass_drift": mass_drift,
        "max_momentum_drift": momentum_drift,
        "max_clipped_mass": clipped,
        "max_cfl": cfl,
        "steps": steps,
        "dt": dt,
    }
    if params["check_steady"]:
        reference = steady.omega0
        still = evolve_strip(steady.field, params["T"], params["dt"], samples=1, cfl_target=params["cfl_target"])
        final = still.samples[-1].field.atoms
        outcome.summary["steady_state_drift"] = float(
            np.max(np.abs(final.values - reference.values)) / max(reference.max_value(), 1e-300)
        )
    return outcome


def _run_euler_disc(config: ExperimentConfig, store: RunStore, run_id: str, streams: TrialStreams) -> _Outcome:
    params = config.params
    tol = config.tolerance("cert_rel_tol")
    steady = radial_steady_state(radial_profile, params["radius"], params["n_atoms"])
    outcome = _Outcome()
    for index in range(config.trials):
        # radial data is itself steady, so omega_t = omega_in for every t
        omega_in = random_function(
            streams.trial("euler_disc", index),
            steady.field.carrier,
            Family.ADDITIVE_PERTURBATION,
            base=steady.omega0,
            amplitude=params["amplitude"],
            radial=True,
        )
        certificate = _retolerate(certify_euler_symmetric(omega_in, omega_in, steady), tol)
        outcome.certificates.append(_tag(certificate, trial=index))
    momentum, mu_square = disc_momentum_identity(steady.omega0)
    functionals = momentum_functionals(steady.field)
    outcome.summary = {
        "A_steady": momentum,
        "mu_square_over_2pi": mu_square,
        "H_steady": functionals.H,
        "energy_consistent": functionals.energy_consistent,
        "constant": 4.0 * math.pi * steady.omega0.max_value(),
    }
    return outcome


def _increasing_in_psi0(omega0: AtomicFunction, psi0: np.ndarray) -> AtomicFunction:
    values = np.empty_like(omega0.values)
    values[np.argsort(psi0, kind="stable")] = np.sort(omega0.values)
    return omega0.with_values(values)


def _run_euler_domain(config: ExperimentConfig, store: RunStore, run_id: str, streams: TrialStreams) -> _Outcome:
    params = config.params
    tol = config.tolerance("cert_rel_tol")
    carrier = Carrier.disc_spiral(params["radius"], params["n_atoms"])
    picard_tol = config.tolerance("picard_tol")
    options: Dict[str, Any] = {"relaxation": params["relaxation"], "max_iter": params["max_iter"]}
    if picard_tol is not None:
        options["tol"] = picard_tol
    steady = build_psi0(stream_profile, carrier, **options)
    curve = psi0_curve(steady)
    outcome = _Outcome()
    worst = _increasing_in_psi0(steady.omega0, steady.psi0)
    outcome.certificates.append(
        _tag(_retolerate(certify_euler_domain(worst, steady), tol), trial="increasing_in_psi0")
    )
    for index in range(config.trials):
        omega = random_function(
            streams.trial("euler_domain", index),
            carrier,
            Family.EQUIMEASURABLE_SHUFFLE,
            base=steady.omega0,
        )
        outcome.certificates.append(_tag(_retolerate(certify_euler_domain(omega, steady), tol), trial=index))
    outcome.summary = {
        "picard_iterations": len(steady.residual_history),
        "picard_residual": steady.residual_history[-1],
        "picard_fixed_point_residual": steady.fixed_point_residual,
        "psi0_strictly_convex": curve.strictly_convex,
        "psi0_min_slope_increment": curve.min_increment,
        "psi0_sup": float(np.max(np.abs(steady.psi0))),
    }
    return outcome


# -- vlasov_poisson --------------------------------------------------------------------------


def _run_vp(config: ExperimentConfig, store: RunStore, run_id: str, streams: TrialStreams) -> _Outcome:
    params = config.params
    tol = config.tolerance("cert_rel_tol")
    options: Dict[str, Any] = {
        key: params[key] for key in ("n_r", "n_v", "r_grid_size", "margin", "table_size")
    }
    shooting_tol = config.tolerance("shooting_tol")
    if shooting_tol is not None:
        options["shooting_tol"] = shooting_tol
    print(f"🌌 Building polytrope k={params['k']} ({params['n_r']}x{params['n_v']} atoms)")
    steady = build_steady_vp(params["k"], params["kappa"], params["e0"], **options)
    outcome = _Outcome()
    store.save_json(run_id, "steady_state.json", steady.to_dict())
    store.save_atoms(run_id, "f0_atoms.csv", steady.f0)
    outcome.artifacts += ["steady_state.json", "f0_atoms.csv"]

    for index in range(config.trials):
        rng = streams.trial("vp", index)
        if index % 2 == 0:
            f = random_function(
                rng, steady.carrier, Family.ADDITIVE_PERTURBATION, base=steady.f0, amplitude=params["amplitude"]
            )
            outcome.certificates.append(_tag(_retolerate(certify_vp_global(f, steady), tol), trial=index))
        else:
            f = random_function(rng, steady.carrier, Family.EQUIMEASURABLE_SHUFFLE, base=steady.f0)
            outcome.certificates.append(_tag(_retolerate(certify_vp_global(f, steady), tol), trial=index))
            outcome.certificates.append(_tag(_retolerate(certify_vp_z2(f, steady), tol), trial=index))

    crosscheck = a_e0_crosscheck(steady)
    outcome.summary = {
        "steady_state": steady.to_dict(),
        "K": steady.K.value,
        "K_method": steady.K.method.value,
        "hamiltonian_f0": hamiltonian_vp(steady.f0),
        "fixed_point_defect": fixed_point_defect(steady),
        "a_e0_max_relative_error": crosscheck["max_relative_error"],
        "interpolation": interpolation_diag(steady.f0).to_dict(),
    }
    return outcome


_RUNNERS: Dict[str, Callable[[ExperimentConfig, RunStore, str, TrialStreams], _Outcome]] = {
    ExperimentKind.CERTIFY_SWEEP.value: _run_certify_sweep,
    ExperimentKind.COROLLARY1_SWEEP.value: _run_corollary1_sweep,
    ExperimentKind.EULER_STRIP_RUN.value: _run_euler_strip,
    ExperimentKind.EULER_DISC_CERTIFY.value: _run_euler_disc,
    ExperimentKind.EULER_DOMAIN_CERTIFY.value: _run_euler_domain,
    ExperimentKind.VP_BUILD_AND_CERTIFY.value: _run_vp,
}


# -- dispatch --------------------------------------------------------------------------------


def run_experiment(config: ExperimentConfig, *, store: Optional[RunStore] = None) -> RunRecord:
    config.validate()
    store = store if store is not None else RunStore(resolve_output_root(config.output_dir))
    snapshot = config.snapshot()
    run_id = config.run_id
    started_at = RunRecord.utc_now()
    store.save_config(run_id, snapshot)
    record = RunRecord(
        run_id=run_id,
        experiment=config.experiment,
        seed=config.seed,
        config=snapshot,
        started_at=started_at,
        artifacts=["config.json"],
    )
    if config.trials == 0:
        record.finished_at = started_at
        return record

    logger.info("Run %s: %s with seed %d, %d trials", run_id, config.experiment, config.seed, config.trials)
    outcome = _RUNNERS[config.experiment](config, store, run_id, TrialStreams(config.seed))
    store.save_certificates(run_id, outcome.certificates)

    caveats: Counter = Counter()
    for certificate in outcome.certificates:
        caveats.update(certificate.caveats)
    slacks = [
        certificate.relative_slack
        for certificate in outcome.certificates
        if certificate.status != Status.INCONCLUSIVE.value and math.isfinite(certificate.slack)
    ]
    record.certificate_count = len(outcome.certificates)
    record.violation_count = sum(1 for certificate in outcome.certificates if certificate.violated)
    record.inconclusive_count = sum(
        1 for certificate in outcome.certificates if certificate.status == Status.INCONCLUSIVE.value
    )
    record.min_slack = min(slacks) if slacks else None
    record.caveat_tally = dict(sorted(caveats.items()))
    record.artifacts = ["config.json", "certificates.json", *outcome.artifacts, "record.json"]
    record.summary = _jsonable(outcome.summary)
    record.finished_at = RunRecord.utc_now()
    store.save_record(record)
    return record


# -- reports ---------------------------------------------------------------------------------


def _by_inequality(certificates: Sequence[Certificate]) -> Dict[str, Dict[str, Any]]:
    table: Dict[str, Dict[str, Any]] = {}
    for certificate in certificates:
        row = table.setdefault(
            certificate.inequality_id, {"count": 0, "violated": 0, "inconclusive": 0, "min_relative_slack": None}
        )
        row["count"] += 1
        if certificate.violated:
            row["violated"] += 1
        if certificate.status == Status.INCONCLUSIVE.value:
            row["inconclusive"] += 1
        elif math.isfinite(certificate.slack):
            current = row["min_relative_slack"]
            value = certificate.relative_slack
            row["min_relative_slack"] = value if current is None else min(current, value)
    return dict(sorted(table.items()))


def slack_histogram(certificates: Sequence[Certificate], bins: int = 20) -> List[Tuple[float, float, int]]:
    slacks = np.array(
        [
            certificate.relative_slack
            for certificate in certificates
            if certificate.status != Status.INCONCLUSIVE.value and math.isfinite(certificate.slack)
        ]
    )
    if slacks.size == 0:
        return []
    counts, edges = np.histogram(slacks, bins=bins)
    return [(float(lo), float(hi), int(count)) for lo, hi, count in zip(edges[:-1], edges[1:], counts)]


def trajectory_slack(certificates: Sequence[Certificate]) -> List[Tuple[float, float]]:
    """Worst slack over all trials at each sample time."""
    worst: Dict[float, float] = {}
    for certificate in certificates:
        t = certificate.components.get("t")
        if t is None:
            continue
        t = float(t)
        worst[t] = min(worst.get(t, math.inf), certificate.slack)
    return sorted(worst.items())


def emit_report(record: RunRecord, store: Optional[RunStore] = None) -> List[Path]:
    """``summary.json`` plus the plot-ready CSV for the experiment kind."""
    store = store if store is not None else RunStore(get_output_root())
    certificates = store.load_certificates(record.run_id)
    summary = {
        "run_id": record.run_id,
        "experiment": record.experiment,
        "seed": record.seed,
        "certificate_count": len(certificates),
        "violation_count": sum(1 for certificate in certificates if certificate.violated),
        "inconclusive_count": sum(1 for c in certificates if c.status == Status.INCONCLUSIVE.value),
        "min_slack": record.min_slack,
        "caveat_tally": record.caveat_tally,
        "by_inequality": _by_inequality(certificates),
        "details": record.summary,
    }
    paths = [store.save_json(record.run_id, "summary.json", _jsonable(summary))]
    if record.experiment in TRAJECTORY_EXPERIMENTS:
        paths.append(store.save_csv(record.run_id, "trajectory_slack.csv", ["t", "slack"], trajectory_slack(certificates)))
    else:
        bins = int(record.config.get("params", {}).get("histogram_bins", 20))
        paths.append(
            store.save_csv(
                record.run_id,
                "slack_histogram.csv",
                ["bin_lo", "bin_hi", "count"],
                slack_histogram(certificates, bins),
            )
        )
    return paths


__all__ = [
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentKind",
    "SWEEP_FAMILIES",
    "SWEEP_INEQUALITIES",
    "emit_report",
    "resolve_config",
    "resolve_output_root",
    "run_experiment",
    "slack_histogram",
    "trajectory_slack",
]

import json
import math

import pytest

from experiments import (
    SWEEP_INEQUALITIES,
    ExperimentConfig,
    ExperimentError,
    emit_report,
    resolve_config,
    resolve_output_root,
    run_experiment,
    slack_histogram,
    trajectory_slack,
)
from rearrangement.certify import Certificate, InequalityId
from run_store import RunStore

NO_PRESETS = {}


def sweep_config(**overrides):
    payload = {
        "experiment": "certify_sweep",
        "seed": 11,
        "trials": 3,
        "params": {"n_atoms": 128, "grid": 8},
    }
    payload.update(overrides)
    return resolve_config(payload, presets=NO_PRESETS)


def test_validation_reports_every_problem():
    config = ExperimentConfig(
        "certify_sweep",
        seed=-1,
        trials=-2,
        params={"bogus": 1, "grid": 1},
        tolerances={"cert_rel_tol": 0, "speed": 1.0},
    )
    with pytest.raises(ExperimentError) as excinfo:
        config.validate()
    problems = excinfo.value.problems
    assert len(problems) == 6
    for prefix in ("seed:", "trials:", "params.bogus:", "params.grid:", "tolerances.cert_rel_tol:", "tolerances.speed:"):
        assert any(problem.startswith(prefix) for problem in problems), prefix


def test_unknown_experiment_and_vp_exponent_rule():
    with pytest.raises(ExperimentError) as excinfo:
        ExperimentConfig("fluid_sweep").validate()
    assert excinfo.value.problems[0].startswith("experiment:")

    with pytest.raises(ExperimentError) as excinfo:
        ExperimentConfig("vp_build_and_certify", params={"k": 3.5}).validate()
    assert len(excinfo.value.problems) == 2
    assert any("k + 3/2" in problem for problem in excinfo.value.problems)


def test_config_layers_defaults_presets_and_payload():
    presets = {"certify_sweep": {"seed": 5, "trials": 3, "params": {"grid": 8, "n_atoms": 64}}}
    config = resolve_config({"experiment": "certify_sweep", "params": {"grid": 16}}, presets=presets)
    assert config.seed == 5
    assert config.trials == 3
    assert config.params["grid"] == 16
    assert config.params["n_atoms"] == 64
    assert config.params["radius"] == 1.0


def test_resolve_config_rejects_unknown_fields_and_mismatched_command():
    with pytest.raises(ExperimentError) as excinfo:
        resolve_config({"experiment": "certify_sweep", "colour": "blue"}, presets=NO_PRESETS)
    assert excinfo.value.problems == ["colour: unknown config field"]
    with pytest.raises(ExperimentError):
        resolve_config({"experiment": "certify_sweep"}, presets=NO_PRESETS, experiment="euler_strip_run")


def test_shipped_presets_validate():
    for name in ("certify_sweep", "corollary1_sweep", "euler_strip_run", "euler_disc_certify", "euler_domain_certify",
                 "vp_build_and_certify"):
        config = resolve_config({"experiment": name})
        assert config.trials > 0


def test_output_root_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv("RLAB_OUT", raising=False)
    assert resolve_output_root(str(tmp_path / "json"), tmp_path / "cli") == tmp_path / "cli"
    assert resolve_output_root(str(tmp_path / "json")) == tmp_path / "json"
    monkeypatch.setenv("RLAB_OUT", str(tmp_path / "env"))
    assert resolve_output_root(str(tmp_path / "json")) == tmp_path / "env"
    assert resolve_output_root(None, tmp_path / "cli") == tmp_path / "cli"


def test_run_id_ignores_output_directory():
    first = sweep_config(output_dir="/tmp/a")
    second = sweep_config(output_dir="/tmp/b")
    assert first.run_id == second.run_id
    assert first.run_id != sweep_config(seed=12).run_id


def test_zero_trials_write_only_the_config(tmp_path):
    store = RunStore(tmp_path)
    record = run_experiment(sweep_config(trials=0), store=store)

    assert sorted(path.name for path in store.run_dir(record.run_id).iterdir()) == ["config.json"]
    assert not (tmp_path / "index.json").exists()
    assert record.finished_at == record.started_at
    assert record.certificate_count == 0


def test_small_sweep_holds_and_reports(tmp_path):
    store = RunStore(tmp_path)
    record = run_experiment(sweep_config(), store=store)

    assert record.certificate_count == 4 * 3 * len(SWEEP_INEQUALITIES)
    assert record.violation_count == 0
    assert record.exit_code == 0
    assert record.min_slack is not None and record.min_slack >= -1e-9
    assert store.index().get(record.run_id) == record

    paths = emit_report(record, store)
    assert [path.name for path in paths] == ["summary.json", "slack_histogram.csv"]
    summary = json.loads(paths[0].read_text(encoding="utf-8"))
    assert sorted(summary["by_inequality"]) == sorted(SWEEP_INEQUALITIES)
    assert summary["violation_count"] == 0
    histogram = paths[1].read_text(encoding="utf-8").splitlines()
    assert histogram[0] == "bin_lo,bin_hi,count"
    assert len(histogram) == 1 + 20
    counted = sum(int(line.split(",")[2]) for line in histogram[1:])
    assert 0 < counted <= record.certificate_count - record.inconclusive_count


def test_reruns_are_byte_identical(tmp_path):
    first = RunStore(tmp_path / "first")
    second = RunStore(tmp_path / "second")
    config = sweep_config(params={"families": ["disc_r2", "empirical"], "n_atoms": 96, "grid": 6})
    run_experiment(config, store=first)
    run_experiment(config, store=second)

    for name in ("config.json", "certificates.json"):
        assert first.path(config.run_id, name).read_bytes() == second.path(config.run_id, name).read_bytes()


def test_empty_run_gives_header_only_histogram(tmp_path):
    store = RunStore(tmp_path)
    record = run_experiment(sweep_config(trials=0), store=store)
    paths = emit_report(record, store)
    assert paths[1].read_text(encoding="utf-8").splitlines() == ["bin_lo,bin_hi,count"]
    assert slack_histogram([]) == []


def test_trajectory_slack_keeps_worst_trial_per_time():
    certificates = []
    for t, slack in ((0.0, 1.0), (0.5, 0.3), (0.5, 0.1), (1.0, 2.0)):
        certificates.append(Certificate.evaluate(InequalityId.EULER_STRIP, 1.0, 1.0 + slack, components={"t": t}))
    rows = trajectory_slack(certificates)
    assert [row[0] for row in rows] == [0.0, 0.5, 1.0]
    assert rows[1][1] == pytest.approx(0.1)


def test_corollary_sweep_runs_every_exponent(tmp_path):
    config = resolve_config(
        {"experiment": "corollary1_sweep", "trials": 2, "params": {"n_atoms": 128, "exponents": [0.5, 2.0]}},
        presets=NO_PRESETS,
    )
    record = run_experiment(config, store=RunStore(tmp_path))
    assert record.certificate_count == 4
    assert record.violation_count == 0


def test_strip_run_writes_one_trajectory_per_trial(tmp_path):
    store = RunStore(tmp_path)
    config = resolve_config(
        {
            "experiment": "euler_strip_run",
            "trials": 1,
            "params": {"grid": 16, "T": 0.05, "samples": 2},
        },
        presets=NO_PRESETS,
    )
    record = run_experiment(config, store=store)

    assert record.certificate_count == 3
    assert record.violation_count == 0
    assert "trajectory.csv" in record.artifacts
    assert record.summary["steady_state_drift"] < 1e-8
    rows = store.path(record.run_id, "trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0] == "t,L1_dist_to_q,lhs,rhs,slack,mass_drift,momentum_drift"
    assert len(rows) == 4

    paths = emit_report(record, store)
    assert paths[1].name == "trajectory_slack.csv"
    assert len(paths[1].read_text(encoding="utf-8").splitlines()) == 4


def test_disc_and_domain_runs(tmp_path):
    store = RunStore(tmp_path)
    disc = run_experiment(
        resolve_config(
            {"experiment": "euler_disc_certify", "trials": 3, "params": {"n_atoms": 256}}, presets=NO_PRESETS
        ),
        store=store,
    )
    assert disc.certificate_count == 3
    assert disc.violation_count == 0
    assert disc.summary["A_steady"] == pytest.approx(math.pi / 6.0, rel=1e-2)

    domain = run_experiment(
        resolve_config(
            {"experiment": "euler_domain_certify", "trials": 2, "params": {"n_atoms": 128}}, presets=NO_PRESETS
        ),
        store=store,
    )
    assert domain.certificate_count == 3
    assert domain.violation_count == 0
    assert domain.summary["picard_residual"] < 1e-8


def test_vp_run_saves_steady_state(tmp_path):
    store = RunStore(tmp_path)
    config = resolve_config(
        {
            "experiment": "vp_build_and_certify",
            "trials": 2,
            "params": {"n_r": 32, "n_v": 32, "r_grid_size": 256, "table_size": 64},
        },
        presets=NO_PRESETS,
    )
    record = run_experiment(config, store=store)

    assert record.certificate_count == 3
    for name in ("steady_state.json", "f0_atoms.csv"):
        assert store.path(record.run_id, name).exists()
        assert name in record.artifacts
    steady = store.load_json(record.run_id, "steady_state.json")
    assert steady["k"] == 1.5
    assert steady["r_shells"] == 32

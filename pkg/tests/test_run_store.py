import json
import math

import pytest

from rearrangement.certify import Certificate, InequalityId
from rearrangement.measure_core import AtomicFunction, Carrier
from rearrangement.run_index import RunIndex, RunRecord
from run_store import TRAJECTORY_COLUMNS, RunStore, RunStoreError, canonical_json


def make_record(run_id="abc123def456", violations=0):
    return RunRecord(
        run_id=run_id,
        experiment="certify_sweep",
        seed=7,
        config={"experiment": "certify_sweep", "seed": 7},
        started_at="2024-01-01T00:00:00+00:00",
        finished_at="2024-01-01T00:00:05+00:00",
        certificate_count=3,
        violation_count=violations,
        min_slack=0.25,
    )


def test_run_store_round_trip(tmp_path):
    store = RunStore(tmp_path / "runs")

    certificates = [
        Certificate.evaluate(InequalityId.HL_THETA, 1.0, 2.0, components={"trial": 0}),
        Certificate.evaluate(InequalityId.THM1_INEQ1, 0.5, math.inf),
    ]
    store.save_certificates("run1", certificates)
    loaded = store.load_certificates("run1")
    assert [cert.to_json() for cert in loaded] == [cert.to_json() for cert in certificates]

    store.save_config("run1", {"seed": 1, "experiment": "certify_sweep"})
    text = store.path("run1", "config.json").read_text(encoding="utf-8")
    assert text == canonical_json({"experiment": "certify_sweep", "seed": 1}) + "\n"
    assert store.load_json("run1", "missing.json") is None


def test_run_id_ignores_key_order():
    first = RunStore.run_id({"seed": 1, "params": {"a": 1, "b": 2.5}})
    second = RunStore.run_id({"params": {"b": 2.5, "a": 1}, "seed": 1})
    assert first == second
    assert len(first) == 12
    assert first != RunStore.run_id({"seed": 2, "params": {"a": 1, "b": 2.5}})


def test_trajectory_csv_keeps_float_precision(tmp_path):
    store = RunStore(tmp_path)
    row = {column: 0.1 * (index + 1) for index, column in enumerate(TRAJECTORY_COLUMNS)}
    path = store.save_trajectory("run2", [row], name="trajectory_001.csv")

    lines = path.read_text(encoding="utf-8").splitlines()
    assert path.name == "trajectory_001.csv"
    assert lines[0] == ",".join(TRAJECTORY_COLUMNS)
    assert [float(cell) for cell in lines[1].split(",")] == [row[column] for column in TRAJECTORY_COLUMNS]


def test_atoms_are_saved_inside_the_run_directory(tmp_path):
    store = RunStore(tmp_path)
    carrier = Carrier.disc_spiral(1.0, 8)
    path = store.save_atoms("run3", "f0_atoms.csv", AtomicFunction(carrier, [1.0] * 8))
    assert path.parent == store.run_dir("run3")
    assert path.read_text(encoding="utf-8").startswith("x1,x2,weight,value")


def test_save_record_updates_index(tmp_path):
    store = RunStore(tmp_path)
    record = make_record()
    store.save_record(record)

    assert store.load_record(record.run_id) == record
    assert store.load_record_from_dir(store.run_dir(record.run_id)).min_slack == 0.25
    index = json.loads((tmp_path / "index.json").read_text(encoding="utf-8"))
    assert [row["run_id"] for row in index] == [record.run_id]

    store.save_record(make_record(violations=2))
    reloaded = RunIndex(tmp_path / "index.json")
    assert len(list(reloaded.all())) == 1
    assert reloaded.get(record.run_id).violation_count == 2
    assert reloaded.get(record.run_id).exit_code == 2


def test_index_is_sorted_by_run_id(tmp_path):
    index = RunIndex(tmp_path / "nested" / "index.json")
    index.upsert(make_record("bbbbbbbbbbbb"))
    index.upsert(make_record("aaaaaaaaaaaa"))
    index.save()
    rows = json.loads((tmp_path / "nested" / "index.json").read_text(encoding="utf-8"))
    assert [row["run_id"] for row in rows] == ["aaaaaaaaaaaa", "bbbbbbbbbbbb"]


def test_missing_record_directory_raises(tmp_path):
    store = RunStore(tmp_path)
    with pytest.raises(RunStoreError):
        store.load_record_from_dir(tmp_path / "nope")
    assert store.load_record("nope") is None


def test_default_root_follows_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RLAB_OUT", str(tmp_path / "elsewhere"))
    store = RunStore()
    assert store.root == tmp_path / "elsewhere"
    assert store.root.is_dir()

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from config import RUN_INDEX_FILENAME, get_output_root
from rearrangement.certify import Certificate
from rearrangement.measure_core import AtomicFunction, write_atoms_csv
from rearrangement.run_index import RunIndex, RunRecord

TRAJECTORY_COLUMNS = ["t", "L1_dist_to_q", "lhs", "rhs", "slack", "mass_drift", "momentum_drift"]


class RunStoreError(RuntimeError):
    pass


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True)


class RunStore:
    """Artifacts of every run under ``<root>/<run_id>/``."""

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else get_output_root()
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def sha256(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @classmethod
    def run_id(cls, config: Dict[str, Any]) -> str:
        return cls.sha256(json.dumps(config, sort_keys=True, ensure_ascii=False, separators=(",", ":")))[:12]

    def run_dir(self, run_id: str) -> Path:
        return self.root / run_id

    def path(self, run_id: str, name: str) -> Path:
        return self.run_dir(run_id) / name

    def index(self) -> RunIndex:
        return RunIndex(self.root / RUN_INDEX_FILENAME)

    def _write_text(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with path.open("w", encoding="utf-8", newline="") as handle:
                handle.write(text)
        except OSError as exc:
            raise RunStoreError(f"Could not write {path}: {exc}") from exc
        return path

    def save_json(self, run_id: str, name: str, payload: Any) -> Path:
        return self._write_text(self.path(run_id, name), canonical_json(payload) + "\n")

    def load_json(self, run_id: str, name: str) -> Optional[Any]:
        path = self.path(run_id, name)
        if not path.exists():
            return None
        with path.open("r", encoding="utf-8") as handle:
            return json.load(handle)

    def save_config(self, run_id: str, config: Dict[str, Any]) -> Path:
        return self.save_json(run_id, "config.json", config)

    def save_certificates(self, run_id: str, certificates: Iterable[Certificate]) -> Path:
        return self.save_json(run_id, "certificates.json", [cert.to_dict() for cert in certificates])

    def load_certificates(self, run_id: str) -> List[Certificate]:
        payload = self.load_json(run_id, "certificates.json") or []
        return [Certificate.from_dict(item) for item in payload]

    def save_csv(self, run_id: str, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self.path(run_id, name)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with path.open("w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(list(header))
                for row in rows:
                    writer.writerow([repr(float(cell)) if isinstance(cell, float) else cell for cell in row])
        except OSError as exc:
            raise RunStoreError(f"Could not write {path}: {exc}") from exc
        return path

    def save_trajectory(self, run_id: str, rows: Iterable[Dict[str, float]], name: str = "trajectory.csv") -> Path:
        return self.save_csv(
            run_id,
            name,
            TRAJECTORY_COLUMNS,
            ([row[column] for column in TRAJECTORY_COLUMNS] for row in rows),
        )

    def save_atoms(self, run_id: str, name: str, f: AtomicFunction) -> Path:
        try:
            return write_atoms_csv(f, self.path(run_id, name))
        except OSError as exc:
            raise RunStoreError(f"Could not write {self.path(run_id, name)}: {exc}") from exc

    def save_record(self, record: RunRecord) -> Path:
        path = self.save_json(record.run_id, "record.json", asdict(record))
        index = self.index()
        index.upsert(record)
        index.save()
        return path

    def load_record(self, run_id: str) -> Optional[RunRecord]:
        payload = self.load_json(run_id, "record.json")
        return RunRecord(**payload) if payload else None

    def load_record_from_dir(self, run_dir: Path) -> RunRecord:
        run_dir = Path(run_dir)
        path = run_dir / "record.json"
        if not path.exists():
            raise RunStoreError(f"No record.json in {run_dir}")
        with path.open("r", encoding="utf-8") as handle:
            return RunRecord(**json.load(handle))


__all__ = ["RunStore", "RunStoreError", "TRAJECTORY_COLUMNS", "canonical_json"]

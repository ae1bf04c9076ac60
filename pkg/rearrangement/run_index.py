from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional


@dataclass
class RunRecord:
    run_id: str
    experiment: str
    seed: int
    config: Dict[str, Any]
    started_at: str
    finished_at: Optional[str] = None
    certificate_count: int = 0
    violation_count: int = 0
    inconclusive_count: int = 0
    min_slack: Optional[float] = None
    caveat_tally: Dict[str, int] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 2 if self.violation_count else 0

    @staticmethod
    def utc_now() -> str:
        return datetime.now(timezone.utc).isoformat()


class RunIndex:
    """``<root>/index.json``: one summary row per run, keyed by run id."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._records: Dict[str, RunRecord] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            return
        with self.path.open("r", encoding="utf-8") as handle:
            raw_records = json.load(handle)
        for item in raw_records:
            record = RunRecord(**item)
            self._records[record.run_id] = record

    def upsert(self, record: RunRecord) -> None:
        self._records[record.run_id] = record

    def get(self, run_id: str) -> Optional[RunRecord]:
        return self._records.get(run_id)

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        records = sorted(self._records.values(), key=lambda item: item.run_id)
        with self.path.open("w", encoding="utf-8") as handle:
            json.dump([asdict(record) for record in records], handle, indent=2, ensure_ascii=False)

    def all(self) -> Iterable[RunRecord]:
        return self._records.values()


__all__ = ["RunIndex", "RunRecord"]

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Any, Dict, List

import yaml

BASE_DIR = Path(__file__).resolve().parent


class ConfigError(RuntimeError):
    pass


_ENV_ASSIGNMENT = re.compile(r"^(?:export\s+)?(RLAB_[A-Z0-9_]+)\s*=\s*(['\"]?)(.*?)\2\s*$")


def _load_env_file(path: Path) -> List[str]:
    """Copy ``RLAB_*`` assignments from ``path`` into the environment; returns the keys set.

    Anything else in the file is ignored, and variables already exported win.
    """
    if not path.exists():
        return []
    loaded = []
    for line in path.read_text(encoding="utf-8").splitlines():
        match = _ENV_ASSIGNMENT.match(line.strip())
        if match is None:
            continue
        key, _, value = match.groups()
        if value and key not in os.environ:
            os.environ[key] = value
            loaded.append(key)
    return loaded


_load_env_file(BASE_DIR / ".env.local")
PRESETS_DIR = BASE_DIR / "presets"
PRESETS_FILE = PRESETS_DIR / "experiments.yaml"
DEFAULT_OUTPUT_ROOT = BASE_DIR / "runs"
RUN_INDEX_FILENAME = "index.json"

# Numerical defaults, overridable per process through the environment
CERT_REL_TOL = float(os.getenv("RLAB_CERT_TOL", 1e-9))
TIE_MASS_REL = float(os.getenv("RLAB_TIE_MASS_REL", 1e-9))
H_FLOOR = float(os.getenv("RLAB_H_FLOOR", 1e-14))
H_GRID_SAMPLES = int(os.getenv("RLAB_H_GRID_SAMPLES", 64))
PICARD_RELAXATION = float(os.getenv("RLAB_PICARD_RELAXATION", 0.5))
PICARD_TOL = float(os.getenv("RLAB_PICARD_TOL", 1e-8))
PICARD_MAX_ITER = int(os.getenv("RLAB_PICARD_MAX_ITER", 500))
SHOOTING_TOL = float(os.getenv("RLAB_SHOOTING_TOL", 1e-10))
SCHEME_DRIFT_TOL = float(os.getenv("RLAB_SCHEME_DRIFT_TOL", 1e-6))
CFL_MAX = float(os.getenv("RLAB_CFL_MAX", 1.0))
LOG_LEVEL = os.getenv("RLAB_LOG_LEVEL", "WARNING")


def get_output_root() -> Path:
    """Run directory root; read on every call so tests can redirect it."""
    return Path(os.getenv("RLAB_OUT", str(DEFAULT_OUTPUT_ROOT)))


def load_presets(path: Path = PRESETS_FILE) -> Dict[str, Dict[str, Any]]:
    if not path.exists():
        return {}
    try:
        payload = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"Malformed presets file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"Presets file {path} must map preset names to settings")
    return payload


def load_config_file(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        payload = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"Malformed config file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"Config file {path} must contain a mapping")
    return payload

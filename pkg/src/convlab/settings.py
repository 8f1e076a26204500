from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass
class Settings:
    seed: int = 0
    scale: int = 64
    pipeline_depth: int = 9
    workers: int = 4
    machine: str = "dedicated"


def _config_dir() -> Path:
    override = os.environ.get("CONVLAB_CONFIG_DIR")
    if override:
        return Path(override)
    return Path.home() / ".config" / "convlab"


def _settings_path() -> Path:
    return _config_dir() / "settings.json"


def save_settings(settings: Settings) -> None:
    _config_dir().mkdir(parents=True, exist_ok=True)
    _settings_path().write_text(json.dumps(asdict(settings), indent=2))


def load_settings() -> Settings:
    try:
        raw = json.loads(_settings_path().read_text())
    except (FileNotFoundError, json.JSONDecodeError):
        return Settings()
    if not isinstance(raw, dict):
        return Settings()

    defaults = Settings()
    values = {}
    for f in fields(Settings):
        value = raw.get(f.name, getattr(defaults, f.name))
        # keep the default when the stored value has the wrong type
        if not isinstance(value, type(getattr(defaults, f.name))) or isinstance(value, bool):
            value = getattr(defaults, f.name)
        values[f.name] = value
    return Settings(**values)

from __future__ import annotations

import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MachineConfig:
    """Per-compute-unit resources, latencies in cycles and DRAM bandwidth in bytes per cycle."""

    name: str = "custom"
    warp_size: int = 32
    schedulers_per_cu: int = 4
    alus_per_cu: int = 64
    max_warps_per_cu: int = 40
    max_workgroups_per_cu: int = 16
    max_workgroup: int = 256
    regfile_per_cu: int = 65536
    shared_per_cu: int = 65536
    num_cus: int = 60
    lat_alu: int = 4
    lat_shared: int = 8
    lat_global: int = 400
    global_bytes_per_cycle: float = 1024.0
    banks: int = 32
    l2_lines: int = 512
    l2_line_bytes: int = 64
    segment_bytes: int = 128
    issue_width: int = 1

    def __post_init__(self) -> None:
        for f in fields(self):
            if f.name == "name":
                continue
            if getattr(self, f.name) <= 0:
                raise ConfigError(f"machine {self.name}: {f.name} must be positive")

    @property
    def alu_warp_cycles(self) -> float:
        """Cycles one warp instruction holds the CU's vector ALUs."""
        return self.warp_size / self.alus_per_cu

    @property
    def issue_slots(self) -> int:
        return self.num_cus * self.schedulers_per_cu * self.issue_width


# bandwidth and CU shape in the proportions of a discrete HBM card, an APU and a phone GPU
_PRESETS = {
    "dedicated": MachineConfig(name="dedicated", num_cus=60, alus_per_cu=64, global_bytes_per_cycle=1024.0),
    "integrated": MachineConfig(name="integrated", num_cus=8, alus_per_cu=64, global_bytes_per_cycle=25.0),
    "embedded": MachineConfig(
        name="embedded",
        num_cus=10,
        alus_per_cu=24,
        # three execution engines per shader core
        schedulers_per_cu=3,
        max_warps_per_cu=24,
        regfile_per_cu=32768,
        shared_per_cu=32768,
        global_bytes_per_cycle=33.3,
    ),
}


def machine_presets() -> dict[str, MachineConfig]:
    return dict(_PRESETS)


def _coerce(name: str, raw: str, current: object) -> object:
    try:
        if isinstance(current, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc
    return raw


def parse_machine(text: str, base: MachineConfig | None = None) -> MachineConfig:
    """`key = value` lines over `base` (default field values); `#` starts a comment."""
    base = base or MachineConfig()
    known = {f.name for f in fields(MachineConfig)}
    updates: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown machine key {key!r}")
        updates[key] = _coerce(key, value, getattr(base, key))
    return replace(base, **updates)


def load_machine(spec: str) -> MachineConfig:
    """A preset name, or a path to a key=value file; a file may start from a preset with `base = name`."""
    if spec in _PRESETS:
        return _PRESETS[spec]
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"unknown machine {spec!r}: not a preset ({', '.join(_PRESETS)}) or a file")
    text = path.read_text()
    base = None
    lines = []
    for line in text.splitlines():
        key, _, value = line.split("#", 1)[0].partition("=")
        if key.strip() == "base":
            base = load_machine(value.strip())
        else:
            lines.append(line)
    machine = parse_machine("\n".join(lines), base)
    if machine.name == (base.name if base else "custom"):
        machine = replace(machine, name=path.stem)
    logger.debug("loaded machine %s from %s", machine.name, path)
    return machine

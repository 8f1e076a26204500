"""Profile reports: simulated metrics per (layer, algorithm, machine) plus analytic counts."""

from __future__ import annotations

import csv
import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path

import anyio
import anyio.to_thread

from ..algos.counts import AlgoCounts
from ..algos.dispatch import counts_for
from ..core.models import AlgoConfig, Algorithm, ConvShape
from ..errors import ConvLabError
from ..ir.lower import lower
from ..sim.machine import MachineConfig
from ..sim.metrics import CSV_COLUMNS, SimMetrics
from ..sim.simulate import simulate_pipeline
from ..tune.search import SearchSpace, tune
from .layers import LayerSpec

logger = logging.getLogger(__name__)

FORMAT_VERSION = "convlab-report/1"

ANALYTIC_COLUMNS = (
    "analytic_multiplies",
    "analytic_adds",
    "analytic_read_bytes",
    "analytic_write_bytes",
    "analytic_barriers",
    "unroll_elements",
    "unrolled_write_bytes",
    "transformed_input_bytes",
)

REPORT_COLUMNS = ("version", "layer", "machine", "config", *CSV_COLUMNS, *ANALYTIC_COLUMNS)

REPORT_ALGORITHMS = (
    Algorithm.IM2COL,
    Algorithm.FUSED_UNROLL,
    Algorithm.WINOGRAD,
    Algorithm.DIRECT_CACHE,
    Algorithm.DIRECT_NOCACHE,
    Algorithm.ILPM,
)

# (layer, algorithm) or (layer, algorithm, machine name)
ConfigKey = tuple[str, Algorithm] | tuple[str, Algorithm, str]


def mib(n: int) -> str:
    return f"{n / (1 << 20):.2f}"


def default_config(algorithm: Algorithm, shape: ConvShape) -> AlgoConfig:
    """Stock configuration, with channel blockings cut down to fit small K."""
    cfg = AlgoConfig(algorithm)
    return replace(
        cfg,
        gemm_tile_m=min(cfg.gemm_tile_m, shape.K),
        workgroup_channels=min(cfg.workgroup_channels, shape.K),
    )


@dataclass(frozen=True)
class ReportRow:
    layer: str
    machine: str
    config: AlgoConfig
    metrics: SimMetrics
    counts: AlgoCounts

    def analytic(self) -> list[int]:
        c = self.counts
        unroll = c.stages.get("im2col")
        return [
            c.multiplies,
            c.adds,
            c.global_read_bytes_analytic,
            c.global_write_bytes_analytic,
            c.barriers,
            c.unroll_elements,
            unroll.global_write_bytes_analytic if unroll else 0,
            c.extra.get("transformed_input_bytes", 0),
        ]

    def csv_row(self) -> list[str]:
        return [
            FORMAT_VERSION,
            self.layer,
            self.machine,
            self.config.label(),
            *self.metrics.csv_row(),
            *(str(v) for v in self.analytic()),
        ]


def report_row(spec: LayerSpec, cfg: AlgoConfig, machine: MachineConfig, scale: int | None,
               pipeline_depth: int = 1) -> ReportRow:
    """Simulate `cfg` on `spec` cut to `scale` channels; analytic counts stay at full size."""
    shape = spec.shape(scale)
    try:
        pipeline = lower(cfg, shape, machine.max_workgroup)
        metrics = simulate_pipeline(pipeline, machine, pipeline_depth=pipeline_depth, name=cfg.algorithm.value)
    except ConvLabError:
        raise
    except Exception as exc:
        raise ConvLabError(f"{spec.name} {cfg.label()} on {machine.name}: {exc}") from exc
    full = spec.shape()
    counts = counts_for(full, replace(cfg, gemm_tile_m=min(cfg.gemm_tile_m, full.K)))
    logger.info("%s %s on %s: %d cycles", spec.name, cfg.label(), machine.name, metrics.cycles)
    return ReportRow(spec.name, machine.name, cfg, metrics, counts)


async def _build(jobs: list[tuple[LayerSpec, AlgoConfig, MachineConfig]], scale: int | None,
                 workers: int, pipeline_depth: int) -> list[ReportRow]:
    limiter = anyio.CapacityLimiter(max(workers, 1))
    rows: list[ReportRow | ConvLabError | None] = [None] * len(jobs)

    async def one(index: int, spec: LayerSpec, cfg: AlgoConfig, machine: MachineConfig) -> None:
        job = partial(report_row, spec, cfg, machine, scale, pipeline_depth)
        try:
            rows[index] = await anyio.to_thread.run_sync(job, limiter=limiter)
        except ConvLabError as exc:
            rows[index] = exc

    async with anyio.create_task_group() as tg:
        for index, (spec, cfg, machine) in enumerate(jobs):
            tg.start_soon(one, index, spec, cfg, machine)
    # first failure in report order
    for row in rows:
        if isinstance(row, ConvLabError):
            raise row
    return [r for r in rows if isinstance(r, ReportRow)]


def tuned_configs(layers: Iterable[LayerSpec], algorithms: Iterable[Algorithm], machines: Iterable[MachineConfig],
                  scale: int | None = 64, space: SearchSpace | None = None, workers: int = 4,
                  pipeline_depth: int = 1) -> dict[ConfigKey, AlgoConfig]:
    """Best configuration per (layer, algorithm, machine name) from the tuner.

    The direct algorithms keep their own filter path so both variants stay in
    the report.
    """
    space = space or SearchSpace()
    machines = list(machines)
    best: dict[ConfigKey, AlgoConfig] = {}
    for spec in layers:
        shape = spec.shape(scale)
        for algorithm in algorithms:
            own = space
            if algorithm.is_direct:
                own = replace(space, cache_filter=(algorithm is Algorithm.DIRECT_CACHE,))
            for machine in machines:
                result = tune(algorithm, shape, machine, own, workers, pipeline_depth)
                best[(spec.name, algorithm, machine.name)] = result.best
    return best


def build_report(layers: Iterable[LayerSpec], algorithms: Iterable[Algorithm], machines: Iterable[MachineConfig],
                 scale: int | None = 64, workers: int = 4, pipeline_depth: int = 1,
                 configs: Mapping[ConfigKey, AlgoConfig] | None = None) -> list[ReportRow]:
    """Full cross product of layers, algorithms and machines, in that nesting order.

    `configs` maps (layer name, algorithm, machine name), or (layer name,
    algorithm) for every machine, to a configuration to use instead of the
    stock one.
    """
    configs = configs or {}
    machines = list(machines)
    jobs = []
    for spec in layers:
        shape = spec.shape(scale)
        for algorithm in algorithms:
            for machine in machines:
                cfg = (configs.get((spec.name, algorithm, machine.name)) or configs.get((spec.name, algorithm))
                       or default_config(algorithm, shape))
                jobs.append((spec, cfg, machine))
    return anyio.run(partial(_build, jobs, scale, workers, pipeline_depth))

def write_report(rows: list[ReportRow], path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(row.csv_row() for row in rows)


def write_plot_data(rows: list[ReportRow], path: Path) -> None:
    """layer,algorithm,cycles triples for plotting execution-time comparisons."""
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("layer", "algorithm", "cycles"))
        for row in rows:
            writer.writerow((row.layer, row.config.algorithm.value, row.metrics.cycles))

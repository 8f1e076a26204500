"""Exhaustive configuration search against the simulator."""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path

import anyio
import anyio.to_thread

from ..core.models import AlgoConfig, Algorithm, ConvShape
from ..errors import ConfigError, ConvLabError, EmptySearchSpaceError, LaunchError
from ..ir.lower import lower
from ..sim.machine import MachineConfig
from ..sim.metrics import SimMetrics
from ..sim.simulate import simulate_pipeline

logger = logging.getLogger(__name__)

AUDIT_COLUMNS = ("config", "cycles", "barriers", "max_live_regs", "skipped")


@dataclass(frozen=True)
class SearchSpace:
    """Candidate values per tunable field.

    Spatial tiles are square unless `square_tiles` is off, in which case every
    (tile_x, tile_y) pair of `tiles` is tried.
    """

    tiles: tuple[int, ...] = (2, 4, 7, 8, 14, 16)
    out_channels_per_thread: tuple[int, ...] = (1, 2, 4, 8)
    cache_filter: tuple[bool, ...] = (True, False)
    transpose_output: tuple[bool, ...] = (True, False)
    gemm_tiles: tuple[int, ...] = (8, 16, 32)
    workgroup_channels: tuple[int, ...] = (8, 16, 32, 64)
    square_tiles: bool = True

    @classmethod
    def singleton(cls, cfg: AlgoConfig) -> SearchSpace:
        return cls(
            tiles=(cfg.tile_x,) if cfg.tile_x == cfg.tile_y else (cfg.tile_x, cfg.tile_y),
            out_channels_per_thread=(cfg.out_channels_per_thread,),
            cache_filter=(bool(cfg.cache_filter),),
            transpose_output=(cfg.transpose_output,),
            gemm_tiles=(cfg.gemm_tile_m,),
            workgroup_channels=(cfg.workgroup_channels,),
            square_tiles=cfg.tile_x == cfg.tile_y,
        )

    def _tile_pairs(self) -> list[tuple[int, int]]:
        if self.square_tiles:
            return [(t, t) for t in self.tiles]
        return list(itertools.product(self.tiles, repeat=2))

    def configs(self, algorithm: Algorithm) -> list[AlgoConfig]:
        """Distinct configurations of `algorithm`, in sort-key order."""
        algorithm = Algorithm(algorithm)
        base = AlgoConfig(algorithm)
        out: dict[tuple, AlgoConfig] = {}

        def add(cfg: AlgoConfig) -> None:
            out.setdefault(cfg.sort_key(), cfg)

        if algorithm.is_direct:
            for (tx, ty), ocpt, cache in itertools.product(
                self._tile_pairs(), self.out_channels_per_thread, self.cache_filter
            ):
                add(replace(base, tile_x=tx, tile_y=ty, out_channels_per_thread=ocpt, cache_filter=cache,
                            algorithm=Algorithm.DIRECT_CACHE if cache else Algorithm.DIRECT_NOCACHE))
        elif algorithm is Algorithm.ILPM:
            for (tx, ty), wg, transpose in itertools.product(
                self._tile_pairs(), self.workgroup_channels, self.transpose_output
            ):
                add(replace(base, tile_x=tx, tile_y=ty, workgroup_channels=wg, transpose_output=transpose))
        elif algorithm is Algorithm.FUSED_UNROLL:
            for (tx, ty), tm in itertools.product(self._tile_pairs(), self.gemm_tiles):
                add(replace(base, tile_x=tx, tile_y=ty, gemm_tile_m=tm))
        elif algorithm.uses_gemm:
            for tm, tn, tk in itertools.product(self.gemm_tiles, repeat=3):
                add(replace(base, gemm_tile_m=tm, gemm_tile_n=tn, gemm_tile_k=tk))
        else:
            raise ConfigError(f"{algorithm.value} has nothing to tune")
        return [out[key] for key in sorted(out)]


@dataclass(frozen=True)
class Trial:
    config: AlgoConfig
    metrics: SimMetrics | None = None
    skipped: str | None = None

    @property
    def cycles(self) -> int | None:
        return self.metrics.cycles if self.metrics else None


@dataclass
class TuneResult:
    best: AlgoConfig
    best_metrics: SimMetrics
    trials: list[Trial] = field(default_factory=list)

    def audit_rows(self) -> list[list[str]]:
        rows = []
        for t in self.trials:
            m = t.metrics
            rows.append([
                t.config.label(),
                "" if m is None else str(m.cycles),
                "" if m is None else str(m.barrier_count),
                "" if m is None else str(m.max_live_regs),
                t.skipped or "",
            ])
        return rows

    def write_audit(self, path: Path) -> None:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(AUDIT_COLUMNS)
            writer.writerows(self.audit_rows())


def run_trial(cfg: AlgoConfig, shape: ConvShape, machine: MachineConfig, pipeline_depth: int = 1) -> Trial:
    """Simulate one configuration; configurations that do not fit are skipped, anything else is an error."""
    try:
        pipeline = lower(cfg, shape, machine.max_workgroup)
        metrics = simulate_pipeline(pipeline, machine, pipeline_depth=pipeline_depth, name=cfg.algorithm.value)
    except (ConfigError, LaunchError) as exc:
        logger.info("skipping %s: %s", cfg.label(), exc)
        return Trial(cfg, skipped=f"{exc.kind}: {exc}")
    except ConvLabError:
        raise
    except Exception as exc:
        raise ConvLabError(f"{cfg.label()}: {exc}") from exc
    return Trial(cfg, metrics)


async def run_trials(configs: list[AlgoConfig], shape: ConvShape, machine: MachineConfig,
                     workers: int = 4, pipeline_depth: int = 1) -> list[Trial]:
    """Simulate `configs` in worker threads; results come back in input order."""
    limiter = anyio.CapacityLimiter(max(workers, 1))
    results: list[Trial | ConvLabError | None] = [None] * len(configs)

    async def one(index: int, cfg: AlgoConfig) -> None:
        job = partial(run_trial, cfg, shape, machine, pipeline_depth)
        try:
            results[index] = await anyio.to_thread.run_sync(job, limiter=limiter)
        except ConvLabError as exc:
            results[index] = exc

    async with anyio.create_task_group() as tg:
        for index, cfg in enumerate(configs):
            tg.start_soon(one, index, cfg)
    for r in results:
        if isinstance(r, ConvLabError):
            raise r
    return [r for r in results if isinstance(r, Trial)]


def tune(algorithm: Algorithm | str, shape: ConvShape, machine: MachineConfig, space: SearchSpace | None = None,
         workers: int = 4, pipeline_depth: int = 1) -> TuneResult:
    """Simulate every configuration in `space`; the fewest cycles wins, ties go to the lowest sort key."""
    space = space or SearchSpace()
    configs = space.configs(Algorithm(algorithm))
    trials = anyio.run(partial(run_trials, configs, shape, machine, workers, pipeline_depth))
    trials.sort(key=lambda t: t.config.sort_key())
    ran = [t for t in trials if t.metrics is not None]
    if not ran:
        reasons = "; ".join(sorted({t.skipped or "" for t in trials}))
        raise EmptySearchSpaceError(f"no valid {Algorithm(algorithm).value} configuration for {shape}: {reasons}")
    best = min(ran, key=lambda t: (t.metrics.cycles, t.config.sort_key()))
    logger.info("best %s: %d cycles over %d trials (%d skipped)",
                best.config.label(), best.metrics.cycles, len(trials), len(trials) - len(ran))
    return TuneResult(best.config, best.metrics, trials)

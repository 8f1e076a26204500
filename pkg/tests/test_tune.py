from __future__ import annotations

import csv
from dataclasses import replace

import pytest

from convlab.bench.layers import layer
from convlab.core.models import AlgoConfig, Algorithm, ConvShape
from convlab.errors import ConfigError, ConvLabError, EmptySearchSpaceError
from convlab.sim.machine import MachineConfig, machine_presets
from convlab.tune import search
from convlab.tune.search import AUDIT_COLUMNS, SearchSpace, run_trial, tune

SHAPE = ConvShape(4, 8, 8, 8)
MACHINE = MachineConfig(name="small", num_cus=2)


def test_default_space_is_sorted_and_distinct():
    configs = SearchSpace().configs(Algorithm.ILPM)
    keys = [c.sort_key() for c in configs]
    assert keys == sorted(set(keys))
    assert len(configs) == 6 * 4 * 2


def test_direct_space_covers_both_variants():
    configs = SearchSpace(tiles=(4,), out_channels_per_thread=(2,)).configs(Algorithm.DIRECT_NOCACHE)
    assert {c.algorithm for c in configs} == {Algorithm.DIRECT_CACHE, Algorithm.DIRECT_NOCACHE}


def test_oracle_is_not_tunable():
    with pytest.raises(ConfigError):
        SearchSpace().configs(Algorithm.ORACLE)


def test_singleton_space_returns_the_config():
    cfg = AlgoConfig(Algorithm.ILPM, tile_x=4, tile_y=4, workgroup_channels=8)
    result = tune(Algorithm.ILPM, SHAPE, MACHINE, SearchSpace.singleton(cfg), workers=1)
    assert result.best == cfg
    assert len(result.trials) == 1


def test_oversized_workgroups_are_skipped():
    machine = MachineConfig(name="narrow", num_cus=2, max_workgroup=64)
    space = SearchSpace(tiles=(4, 16), out_channels_per_thread=(2,), cache_filter=(False,))
    result = tune(Algorithm.DIRECT_NOCACHE, SHAPE, machine, space, workers=2)
    skipped = [t for t in result.trials if t.skipped]
    assert [t.config.tile_x for t in skipped] == [16]
    assert skipped[0].skipped.startswith("config:")
    assert result.best.tile_x == 4


def test_nothing_valid_raises():
    space = SearchSpace(tiles=(4,), workgroup_channels=(64,))
    with pytest.raises(EmptySearchSpaceError):
        tune(Algorithm.ILPM, SHAPE, MACHINE, space)


def test_best_has_fewest_cycles():
    space = SearchSpace(tiles=(2, 4, 8), workgroup_channels=(8,), transpose_output=(False,))
    result = tune(Algorithm.ILPM, SHAPE, MACHINE, space, workers=3)
    cycles = [t.cycles for t in result.trials]
    assert result.best_metrics.cycles == min(cycles)
    assert [t.config.sort_key() for t in result.trials] == sorted(t.config.sort_key() for t in result.trials)


def test_run_trial_matches_tune():
    cfg = AlgoConfig(Algorithm.ILPM, tile_x=4, tile_y=4, workgroup_channels=8)
    trial = run_trial(cfg, SHAPE, MACHINE)
    assert trial.skipped is None
    assert trial.metrics.kernel == "ilpm"
    again = tune(Algorithm.ILPM, SHAPE, MACHINE, SearchSpace.singleton(cfg))
    assert again.best_metrics == trial.metrics


def test_audit_records_barriers_per_variant(tmp_path):
    space = SearchSpace(tiles=(4,), out_channels_per_thread=(2,))
    result = tune(Algorithm.DIRECT_CACHE, SHAPE, MACHINE, space)
    path = tmp_path / "audit.csv"
    result.write_audit(path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == AUDIT_COLUMNS
    barriers = {row[0].split()[0]: int(row[2]) for row in rows[1:]}
    assert barriers == {"direct_cache": SHAPE.C * 2, "direct_nocache": SHAPE.C}


def test_direct_tuning_keeps_the_faster_filter_path():
    shape = layer("conv4.x").shape(64)
    space = SearchSpace(tiles=(7,), out_channels_per_thread=(2,))
    result = tune(Algorithm.DIRECT_CACHE, shape, machine_presets()["embedded"], space, workers=2, pipeline_depth=9)
    cycles = {t.config.algorithm: t.cycles for t in result.trials}
    assert set(cycles) == {Algorithm.DIRECT_CACHE, Algorithm.DIRECT_NOCACHE}
    assert result.best.algorithm == min(cycles, key=cycles.get)
    rows = {row[0].split()[0]: row[1] for row in result.audit_rows()}
    loser = max(cycles, key=cycles.get)
    assert rows[loser.value] == str(cycles[loser])


def test_rectangular_tiles_are_opt_in():
    square = SearchSpace(tiles=(2, 7), workgroup_channels=(8,), transpose_output=(False,))
    assert [(c.tile_x, c.tile_y) for c in square.configs(Algorithm.ILPM)] == [(2, 2), (7, 7)]
    rectangular = replace(square, square_tiles=False)
    assert [(c.tile_x, c.tile_y) for c in rectangular.configs(Algorithm.ILPM)] == [(2, 2), (2, 7), (7, 2), (7, 7)]


def test_unexpected_failures_surface_as_lab_errors(monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("scheduler lost a warp")

    monkeypatch.setattr(search, "simulate_pipeline", broken)
    cfg = AlgoConfig(Algorithm.ILPM, tile_x=4, tile_y=4, workgroup_channels=8)
    with pytest.raises(ConvLabError, match="scheduler lost a warp") as info:
        run_trial(cfg, SHAPE, MACHINE)
    assert isinstance(info.value.__cause__, RuntimeError)
    with pytest.raises(ConvLabError, match="tile_x=4"):
        tune(Algorithm.ILPM, SHAPE, MACHINE, SearchSpace.singleton(cfg), workers=2)

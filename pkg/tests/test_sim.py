from __future__ import annotations

from dataclasses import replace

import pytest

from convlab.core.models import AlgoConfig, Algorithm, ConvShape
from convlab.errors import LaunchError
from convlab.ir.analysis import load_add_batch, load_add_chain
from convlab.ir.lower import lower
from convlab.sim.machine import MachineConfig
from convlab.sim.metrics import CSV_COLUMNS, SimMetrics
from convlab.sim.simulate import occupancy, simulate, simulate_pipeline

SHAPE = ConvShape(16, 16, 14, 14)


def ilpm(shape=SHAPE, tile=7, wg=16, transpose=False):
    cfg = AlgoConfig(Algorithm.ILPM, tile_x=tile, tile_y=tile, workgroup_channels=wg, transpose_output=transpose)
    return lower(cfg, shape).kernels[0]


def test_independent_loads_overlap(one_cu):
    batch = simulate(load_add_batch(10), one_cu).cycles
    chain = simulate(load_add_chain(10), one_cu).cycles
    assert 400 <= batch <= 450
    # every add waits out a full global latency
    assert 4000 <= chain <= 4200
    assert chain >= 5 * batch


def test_more_warps_hide_latency(one_cu):
    one = simulate(load_add_chain(10), one_cu).cycles
    eight = simulate(replace(load_add_chain(10), workgroup_dims=(256, 1)), one_cu).cycles
    assert eight < 2 * one


def test_loads_in_flight_shorten_the_chain(one_cu):
    base = simulate(load_add_chain(10), one_cu, pipeline_depth=1).cycles
    deep = simulate(load_add_chain(10), one_cu, pipeline_depth=4).cycles
    assert deep < base // 2


def test_simulation_is_deterministic():
    m = MachineConfig(num_cus=4)
    first = simulate(ilpm(), m)
    second = simulate(ilpm(), m)
    assert first == second


def test_metrics_are_consistent():
    m = MachineConfig(num_cus=4)
    for cfg in (
        AlgoConfig(Algorithm.DIRECT_CACHE, tile_x=7, tile_y=7, out_channels_per_thread=2),
        AlgoConfig(Algorithm.IM2COL, gemm_tile_m=16, gemm_tile_n=16, gemm_tile_k=16),
        AlgoConfig(Algorithm.ILPM, tile_x=7, tile_y=7, workgroup_channels=16),
    ):
        metrics = simulate_pipeline(lower(cfg, SHAPE), m)
        assert metrics.global_read_bytes_post_l2 <= metrics.global_read_bytes_raw
        assert 0.0 <= metrics.alu_busy_fraction <= 1.0
        assert 0.0 <= metrics.mem_unit_busy_fraction <= 1.0
        assert metrics.global_write_bytes >= SHAPE.K * SHAPE.out_pixels * 4
        assert metrics.cycles > 0


def test_direct_reads_more_filter_bytes_than_ilpm():
    m = MachineConfig(num_cus=4)
    direct = lower(AlgoConfig(Algorithm.DIRECT_CACHE, tile_x=7, tile_y=7, out_channels_per_thread=2), SHAPE)
    d = simulate_pipeline(direct, m).traffic_by_buffer["filter"]
    i = simulate(ilpm(), m).traffic_by_buffer["filter"]
    assert d.read_raw > i.read_raw
    assert d.read_post_l2 >= i.read_post_l2


def test_more_resident_workgroups_never_slow_down(one_cu):
    chain = replace(load_add_chain(10), grid_dims=(8, 1, 1))
    runs = [simulate(chain, replace(one_cu, max_workgroups_per_cu=r)) for r in range(1, 9)]
    cycles = [m.cycles for m in runs]
    assert all(later <= earlier for earlier, later in zip(cycles, cycles[1:]))
    # five to seven slots still need two waves, which split four and four
    assert [m.waves for m in runs] == [8, 4, 3, 2, 2, 2, 2, 1]
    assert cycles[4] == cycles[5] == cycles[6] == cycles[3]


@pytest.mark.parametrize(
    "cfg",
    [
        AlgoConfig(Algorithm.DIRECT_NOCACHE, tile_x=7, tile_y=7, out_channels_per_thread=2),
        AlgoConfig(Algorithm.DIRECT_CACHE, tile_x=7, tile_y=7, out_channels_per_thread=2),
        AlgoConfig(Algorithm.ILPM, tile_x=7, tile_y=7, workgroup_channels=16),
        AlgoConfig(Algorithm.FUSED_UNROLL, tile_x=7, tile_y=7, gemm_tile_m=8),
        AlgoConfig(Algorithm.IM2COL, gemm_tile_m=16, gemm_tile_n=16, gemm_tile_k=16),
        AlgoConfig(Algorithm.WINOGRAD, gemm_tile_m=16, gemm_tile_n=16, gemm_tile_k=16),
    ],
    ids=lambda cfg: cfg.algorithm.value,
)
def test_cycles_respect_issue_and_bandwidth(cfg):
    m = MachineConfig(num_cus=4, global_bytes_per_cycle=16.0)
    for kernel in lower(cfg, SHAPE):
        metrics = simulate(kernel, m, pipeline_depth=9)
        assert metrics.cycles >= metrics.vector_inst / m.issue_slots
        moved = metrics.global_read_bytes_post_l2 + metrics.global_write_bytes
        assert metrics.cycles >= moved / m.global_bytes_per_cycle


def test_uncached_direct_reads_more_filter_bytes_than_ilpm():
    shape = ConvShape(64, 64, 14, 14)
    m = MachineConfig(num_cus=4)
    direct = lower(AlgoConfig(Algorithm.DIRECT_NOCACHE, tile_x=7, tile_y=7, out_channels_per_thread=4), shape)
    d = simulate_pipeline(direct, m).traffic_by_buffer["filter"]
    i = simulate(ilpm(shape, tile=7, wg=32), m).traffic_by_buffer["filter"]
    assert d.read_raw > i.read_raw
    # lockstep rounds let the L2 fold repeated filter rows for both
    assert d.read_post_l2 >= i.read_post_l2


def test_ilpm_broadcast_reads_are_conflict_free():
    assert simulate(ilpm(), MachineConfig(num_cus=4)).bank_conflict_extra_cycles == 0


def test_transposed_output_needs_fewer_transactions():
    shape = ConvShape(2, 32, 14, 14)
    m = MachineConfig(num_cus=4)
    plain = simulate(ilpm(shape, tile=14, wg=32), m)
    transposed = simulate(ilpm(shape, tile=14, wg=32, transpose=True), m)
    assert transposed.transactions < plain.transactions
    assert transposed.global_write_bytes == plain.global_write_bytes


def test_resident_images_scale_traffic():
    m = MachineConfig(num_cus=4)
    one = simulate(ilpm(), m)
    two = simulate(ilpm(), m, resident_images=2)
    assert two.global_read_bytes_raw == 2 * one.global_read_bytes_raw
    assert two.global_write_bytes == 2 * one.global_write_bytes
    assert two.workgroups == 2 * one.workgroups
    with pytest.raises(LaunchError):
        simulate(ilpm(), m, resident_images=0)


def test_launch_limits():
    p = ilpm()
    with pytest.raises(LaunchError):
        simulate(p, MachineConfig(shared_per_cu=64))
    with pytest.raises(LaunchError):
        simulate(p, MachineConfig(regfile_per_cu=64))
    with pytest.raises(LaunchError):
        simulate(p, MachineConfig(max_workgroup=8))
    assert occupancy(p, MachineConfig(max_workgroups_per_cu=3), 4) == 3


def test_csv_row_matches_columns():
    metrics = simulate(ilpm(), MachineConfig(num_cus=4))
    row = metrics.csv_row()
    assert len(CSV_COLUMNS) == 13
    assert len(row) == len(CSV_COLUMNS)
    assert row[0] == "ilpm"


def _metrics(name, cycles, reads, alu):
    return SimMetrics(
        kernel=name, global_read_bytes_raw=reads, global_read_bytes_post_l2=reads, global_write_bytes=8,
        shared_bytes_per_wg=cycles, bank_conflict_extra_cycles=0, barrier_count=1, vector_inst=10,
        scalar_inst=2, max_live_regs=cycles // 10, cycles=cycles, alu_busy_fraction=alu,
        mem_unit_busy_fraction=0.0, occupancy=cycles,
    )


def test_combine():
    total = SimMetrics.combine([_metrics("a", 100, 64, 1.0), _metrics("b", 300, 32, 0.0)])
    assert total.kernel == "a+b"
    assert total.cycles == 400
    assert total.global_read_bytes_raw == 96
    assert total.barrier_count == 2
    assert total.shared_bytes_per_wg == 300
    assert total.max_live_regs == 30
    assert total.occupancy == 100
    assert total.alu_busy_fraction == pytest.approx(0.25)
    assert SimMetrics.combine([_metrics("a", 1, 1, 0.5)], name="x").kernel == "x"
    with pytest.raises(ValueError):
        SimMetrics.combine([])

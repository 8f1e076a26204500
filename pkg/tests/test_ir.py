from __future__ import annotations

import pytest

from convlab.algos.direct import direct_counts
from convlab.algos.dispatch import counts_for
from convlab.core.models import AlgoConfig, Algorithm, ConvShape
from convlab.errors import ConfigError
from convlab.ir.analysis import (
    barrier_census,
    dynamic_counts,
    load_add_batch,
    load_add_chain,
    pipeline_loads,
    register_pressure,
    uniform_counts,
)
from convlab.ir.builder import KernelBuilder
from convlab.ir.lower import lower
from convlab.ir.program import Affine, Buffer, Loop, Op, RegKind, bound, static_barriers, without_barrier
from convlab.ir.text import pipeline_text, to_text

SHAPE = ConvShape(4, 8, 9, 9)


def test_affine_arithmetic():
    a = Affine.of(3, tid_x=1) + Affine.of(1, tid_x=2, c=4)
    assert a == Affine.of(4, c=4, tid_x=3)
    assert (a * 2).coeff("c") == 8
    assert a.evaluate({"tid_x": 2, "c": 1}) == 14
    assert a.depends_on_thread()
    assert not Affine.of(5, gid_x=1).depends_on_thread()


def test_guard_evaluates_half_open_ranges():
    g = bound(Affine.of(0, i=1), 0, 3)
    assert [bool(g.evaluate({"i": i})) for i in range(-1, 4)] == [False, True, True, True, False]


def test_builder_drops_empty_loops_and_rejects_shadowing():
    b = KernelBuilder("k")
    with b.loop("i", 0):
        b.barrier()
    with pytest.raises(ValueError):
        with b.loop("i", 2):
            with b.loop("i", 2):
                pass
    assert b.build((1, 1), (1, 1, 1)).body == ()


def test_uniform_memory_ops():
    b = KernelBuilder("k")
    u = b.ld_global(Buffer.FILTER, Affine.of(0, gid_z=4), RegKind.FILTER)
    v = b.ld_global(Buffer.INPUT, Affine.of(0, tid_x=4), RegKind.IMAGE)
    b.add(u, u)
    b.add(u, v)
    p = b.build((32, 1), (1, 1, 1))
    assert [i.uniform for i in p.instructions()] == [True, False, True, False]
    assert uniform_counts(p) == (2, 2)


@pytest.mark.parametrize(
    ("cfg", "kernel", "barriers"),
    [
        (AlgoConfig(Algorithm.DIRECT_NOCACHE, tile_x=3, tile_y=3, out_channels_per_thread=2), "direct_nocache", 4),
        (AlgoConfig(Algorithm.DIRECT_CACHE, tile_x=3, tile_y=3, out_channels_per_thread=2), "direct_cache", 8),
        (AlgoConfig(Algorithm.ILPM, tile_x=3, tile_y=3, workgroup_channels=8), "ilpm", 4),
        (AlgoConfig(Algorithm.ILPM, tile_x=3, tile_y=3, workgroup_channels=8, transpose_output=True), "ilpm", 5),
        (AlgoConfig(Algorithm.FUSED_UNROLL, tile_x=3, tile_y=3, gemm_tile_m=4), "fused_unroll", 8),
        (AlgoConfig(Algorithm.IM2COL), "im2col", 0),
        (AlgoConfig(Algorithm.WINOGRAD), "trans_from_image", 0),
    ],
)
def test_barrier_census(cfg, kernel, barriers):
    assert barrier_census(lower(cfg, SHAPE)[kernel]) == barriers


def test_barrier_census_conv4():
    shape = ConvShape(256, 256, 14, 14)
    cache = lower(AlgoConfig(Algorithm.DIRECT_CACHE, out_channels_per_thread=4), shape)
    nocache = lower(AlgoConfig(Algorithm.DIRECT_NOCACHE, out_channels_per_thread=4), shape)
    ilpm = lower(AlgoConfig(Algorithm.ILPM, tile_x=14, tile_y=14, workgroup_channels=64), shape)
    assert barrier_census(cache["direct_cache"]) == 1024
    assert barrier_census(nocache["direct_nocache"]) == 256
    assert barrier_census(ilpm["ilpm"]) == 256


def test_gemm_two_barriers_per_k_tile():
    pipeline = lower(AlgoConfig(Algorithm.IM2COL, gemm_tile_k=12), SHAPE)
    # 4 channels * 9 taps = 36 rows of the unrolled matrix
    assert barrier_census(pipeline["gemm"]) == 2 * 3
    assert pipeline.names == ("im2col", "gemm")


def test_winograd_pipeline():
    pipeline = lower(AlgoConfig(Algorithm.WINOGRAD), SHAPE)
    assert pipeline.names == ("trans_from_image", "gemm", "trans_to_output")
    assert pipeline["gemm"].grid_dims[2] == 16
    counts = dynamic_counts(pipeline["trans_from_image"])
    assert counts[Op.ADD] + counts[Op.SUB] == 32


def _dynamic(body, pred, trips=1):
    total = 0
    for node in body:
        if isinstance(node, Loop):
            total += _dynamic(node.body, pred, trips * node.count)
        elif pred(node):
            total += trips
    return total


def test_ilpm_fma_per_filter_load():
    shape = ConvShape(2, 16, 8, 8)
    p = lower(AlgoConfig(Algorithm.ILPM, tile_x=4, tile_y=4, workgroup_channels=16), shape)["ilpm"]
    counts = dynamic_counts(p)
    assert counts[Op.FMA] == 2 * 9 * 16
    filter_loads = _dynamic(p.body, lambda i: i.op is Op.LD_GLOBAL and i.buffer is Buffer.FILTER)
    # one tap ahead of the first, the load after the last tap is guarded off
    assert filter_loads == 2 * 9 + 1
    filter_regs = {i.dst for i in p.instructions() if i.op is Op.LD_GLOBAL and i.buffer is Buffer.FILTER}
    assert len(filter_regs) == 1
    # each filter row reads a 6-wide segment of 4 halo rows once for its 3 taps
    assert counts[Op.LD_SHARED] == 2 * 3 * 4 * 6


def test_reused_destination_is_not_hoisted():
    b = KernelBuilder("rotate")
    acc = b.accumulator()
    f = b.ld_global(Buffer.FILTER, Affine.of(0), RegKind.FILTER)
    b.fma(acc, f, f)
    b.ld_global(Buffer.FILTER, Affine.of(4), RegKind.FILTER, into=f)
    b.fma(acc, f, f)
    p = pipeline_loads(b.build((1, 1), (1, 1, 1)), 4)
    assert [i.op for i in p.instructions()] == [Op.LD_GLOBAL, Op.FMA, Op.LD_GLOBAL, Op.FMA]


def test_unsupported_algorithm_has_no_lowering():
    with pytest.raises(ConfigError):
        lower(AlgoConfig(Algorithm.ORACLE), SHAPE)


def test_without_barrier():
    p = lower(AlgoConfig(Algorithm.FUSED_UNROLL, tile_x=3, tile_y=3, gemm_tile_m=4), SHAPE)["fused_unroll"]
    assert static_barriers(p) == 2
    stripped = without_barrier(p, 1)
    assert static_barriers(stripped) == 1
    assert barrier_census(stripped) == SHAPE.C
    with pytest.raises(IndexError):
        without_barrier(p, 2)


def test_text_form():
    p = load_add_chain(2)
    text = to_text(p)
    lines = text.splitlines()
    assert lines[0] == "kernel load_add_chain workgroup=1x1 grid=1x1x1 shared=0"
    assert lines[1] == "accumulators r0"
    assert lines[2] == "LOOP i 2 {"
    assert lines[3] == "  r1 = LD_GLOBAL input[4*i] [uniform]"
    assert lines[4] == "  r0 = ADD r0, r1"
    assert lines[5] == "}"
    assert lines[6] == "ST_GLOBAL output[0] <- r0"


def test_pipeline_text_lists_every_kernel():
    text = pipeline_text(lower(AlgoConfig(Algorithm.IM2COL), SHAPE))
    assert text.count("kernel ") == 2
    assert "kernel gemm workgroup=16x16" in text


def test_micro_register_pressure():
    assert register_pressure(load_add_chain(4)).max_live == 2
    assert register_pressure(load_add_batch(4)).max_live == 5


def test_pipelining_hoists_loads_within_blocks():
    p = pipeline_loads(load_add_batch(4), 4)
    ops = [i.op for i in p.instructions()]
    assert ops[:4] == [Op.LD_GLOBAL] * 4
    with pytest.raises(ConfigError):
        pipeline_loads(p, 0)


def test_filter_registers_at_full_depth():
    shape = ConvShape(4, 16, 14, 14)
    ilpm = lower(AlgoConfig(Algorithm.ILPM, tile_x=7, tile_y=7, workgroup_channels=16), shape)["ilpm"]
    direct = lower(AlgoConfig(Algorithm.DIRECT_NOCACHE, tile_x=7, tile_y=7), shape)["direct_nocache"]
    depth = shape.taps
    assert register_pressure(ilpm, depth).live(RegKind.FILTER) == 1
    assert register_pressure(direct, depth).live(RegKind.FILTER) == 9
    assert register_pressure(direct, 1).live(RegKind.FILTER) == 1


EXACT = ConvShape(4, 8, 8, 8)


@pytest.mark.parametrize(
    "cfg",
    [
        AlgoConfig(Algorithm.IM2COL, gemm_tile_m=8, gemm_tile_n=16, gemm_tile_k=4),
        AlgoConfig(Algorithm.WINOGRAD, gemm_tile_m=8, gemm_tile_n=16, gemm_tile_k=4),
        AlgoConfig(Algorithm.FUSED_UNROLL, tile_x=4, tile_y=4, gemm_tile_m=4),
        AlgoConfig(Algorithm.DIRECT_CACHE, tile_x=4, tile_y=4, out_channels_per_thread=2),
        AlgoConfig(Algorithm.DIRECT_NOCACHE, tile_x=8, tile_y=8, out_channels_per_thread=4),
        AlgoConfig(Algorithm.ILPM, tile_x=4, tile_y=4, workgroup_channels=8),
    ],
    ids=lambda cfg: cfg.algorithm.value,
)
def test_lowered_fmas_match_analytic_multiplies(cfg):
    # tiles divide the layer exactly, so no thread multiplies padding
    pipeline = lower(cfg, EXACT)
    fmas = sum(dynamic_counts(k)[Op.FMA] * k.threads for k in pipeline)
    assert fmas == counts_for(EXACT, cfg).multiplies


@pytest.mark.parametrize("cache", [True, False])
def test_direct_barriers_match_the_kernel(cache):
    algorithm = Algorithm.DIRECT_CACHE if cache else Algorithm.DIRECT_NOCACHE
    cfg = AlgoConfig(algorithm, tile_x=4, tile_y=4, out_channels_per_thread=2)
    assert barrier_census(lower(cfg, EXACT)[algorithm.value]) == direct_counts(EXACT, cfg).barriers

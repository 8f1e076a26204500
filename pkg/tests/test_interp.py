from __future__ import annotations

import numpy as np
import pytest

from convlab.algos.oracle import max_relative_error, oracle_conv
from convlab.core.models import AlgoConfig, Algorithm, ConvShape
from convlab.core.tensor import random_operands
from convlab.errors import LaunchError
from convlab.ir.builder import KernelBuilder
from convlab.ir.interp import execute, prepare_buffers, run_pipeline
from convlab.ir.lower import lower
from convlab.ir.program import Affine, Buffer, RegKind, without_barrier

SHAPE = ConvShape(4, 8, 9, 9)

CONFIGS = [
    AlgoConfig(Algorithm.IM2COL, gemm_tile_m=8, gemm_tile_n=8, gemm_tile_k=8),
    AlgoConfig(Algorithm.FUSED_UNROLL, tile_x=4, tile_y=4, gemm_tile_m=4),
    AlgoConfig(Algorithm.WINOGRAD, gemm_tile_m=8, gemm_tile_n=8, gemm_tile_k=4),
    AlgoConfig(Algorithm.DIRECT_CACHE, tile_x=4, tile_y=4, out_channels_per_thread=2),
    AlgoConfig(Algorithm.DIRECT_NOCACHE, tile_x=4, tile_y=4, out_channels_per_thread=2),
    AlgoConfig(Algorithm.ILPM, tile_x=4, tile_y=4, workgroup_channels=8),
    AlgoConfig(Algorithm.ILPM, tile_x=9, tile_y=2, workgroup_channels=8, transpose_output=True),
    AlgoConfig(Algorithm.ILPM, tile_x=4, tile_y=4, workgroup_channels=8, transpose_output=True),
]


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: c.label())
def test_kernels_compute_the_convolution(cfg, rng):
    inp, filters = random_operands(SHAPE, rng)
    out, results = run_pipeline(lower(cfg, SHAPE), SHAPE, inp, filters)
    want = oracle_conv(inp, filters, SHAPE).output.data
    tol = 1e-3 if cfg.algorithm is Algorithm.WINOGRAD else 1e-4
    assert max_relative_error(out.data, want) <= tol
    assert all(r.hazard_free for r in results)


@pytest.mark.parametrize(
    ("cfg", "index", "kind"),
    [
        (AlgoConfig(Algorithm.ILPM, tile_x=4, tile_y=4, workgroup_channels=8), 0, "RAW"),
        (AlgoConfig(Algorithm.DIRECT_NOCACHE, tile_x=4, tile_y=4), 0, "RAW"),
        (AlgoConfig(Algorithm.FUSED_UNROLL, tile_x=4, tile_y=4, gemm_tile_m=4), 0, "RAW"),
        (AlgoConfig(Algorithm.FUSED_UNROLL, tile_x=4, tile_y=4, gemm_tile_m=4), 1, "WAR"),
        (AlgoConfig(Algorithm.IM2COL, gemm_tile_m=8, gemm_tile_n=8, gemm_tile_k=8), 1, "WAR"),
    ],
)
def test_removing_a_barrier_races(cfg, index, kind, rng):
    inp, filters = random_operands(SHAPE, rng)
    pipeline = lower(cfg, SHAPE)
    kernel = pipeline.kernels[-1]
    buffers = prepare_buffers(pipeline, SHAPE, inp, filters)
    for earlier in pipeline.kernels[:-1]:
        execute(earlier, buffers)
    result = execute(without_barrier(kernel, index), buffers)
    assert kind in {h.kind for h in result.hazards}


def test_cooperative_store_and_read():
    b = KernelBuilder("rotate")
    x = b.ld_global(Buffer.INPUT, Affine.of(0, tid_x=4), RegKind.IMAGE)
    b.st_shared(Affine.of(0, tid_x=4), x)
    b.barrier()
    y = b.ld_shared(Affine.of(4, tid_x=4), RegKind.IMAGE)
    b.st_global(Buffer.OUTPUT, Affine.of(0, tid_x=4), y)
    program = b.build((4, 1), (1, 1, 1), shared_bytes=20)
    buffers = {Buffer.INPUT: np.arange(4, dtype=np.float32), Buffer.OUTPUT: np.zeros(4, np.float32)}
    result = execute(program, buffers)
    assert buffers[Buffer.OUTPUT].tolist() == [1.0, 2.0, 3.0, 0.0]
    assert result.hazard_free
    assert result.barriers == 1


def test_out_of_bounds_access_fails_the_launch():
    b = KernelBuilder("oob")
    b.ld_global(Buffer.INPUT, Affine.of(0, tid_x=4), RegKind.IMAGE)
    program = b.build((8, 1), (1, 1, 1))
    with pytest.raises(LaunchError):
        execute(program, {Buffer.INPUT: np.zeros(4, np.float32)})


def test_prepare_buffers_uses_pipeline_filter_layout(rng):
    inp, filters = random_operands(SHAPE, rng)
    pipeline = lower(AlgoConfig(Algorithm.ILPM, workgroup_channels=8), SHAPE)
    buffers = prepare_buffers(pipeline, SHAPE, inp, filters)
    # CRSK: the first K words are tap (0, 0, 0) of every filter
    assert np.array_equal(buffers[Buffer.FILTER][: SHAPE.K], filters.data[:, 0, 0, 0])


def test_alu_ops():
    b = KernelBuilder("alu")
    x = b.ld_global(Buffer.INPUT, Affine.of(0, tid_x=4), RegKind.IMAGE)
    y = b.ld_global(Buffer.INPUT, Affine.of(8, tid_x=4), RegKind.IMAGE)
    d = b.sub(b.mul(x, y), b.add(x, y))
    b.st_global(Buffer.OUTPUT, Affine.of(0, tid_x=4), d)
    program = b.build((2, 1), (1, 1, 1))
    buffers = {Buffer.INPUT: np.array([2, 3, 5, 7], np.float32), Buffer.OUTPUT: np.zeros(2, np.float32)}
    execute(program, buffers)
    # 2*5 - (2+5), 3*7 - (3+7)
    assert buffers[Buffer.OUTPUT].tolist() == [3.0, 11.0]

from __future__ import annotations

from ..algos.winograd import ALPHA, ELEMENTS, M, WinogradPlan
from ..core.models import AlgoConfig, ConvShape, ceil_div
from .builder import KernelBuilder
from .lower_gemm import Operand, gemm_kernel
from .lower_tiles import WORD, A, image_guard, input_word
from .program import Affine, Buffer, Guard, KernelProgram, Pipeline, RegKind, bound

TRANSFORM_TILE = 8


def _tile_coords(plan: WinogradPlan) -> tuple[tuple[int, int], Affine, Affine, Guard]:
    wx, wy = min(TRANSFORM_TILE, plan.tiles_x), min(TRANSFORM_TILE, plan.tiles_y)
    ty, tx = A(0, gid_y=wy, tid_y=1), A(0, gid_x=wx, tid_x=1)
    return (wx, wy), ty, tx, bound(ty, 0, plan.tiles_y) & bound(tx, 0, plan.tiles_x)


def _bt_pass(b: KernelBuilder, x: list[int]) -> list[int]:
    """BT applied to four values: 4 additions."""
    return [b.sub(x[0], x[2]), b.add(x[1], x[2]), b.sub(x[2], x[1]), b.sub(x[1], x[3])]


def _at_pass(b: KernelBuilder, x: list[int]) -> list[int]:
    """AT applied to four values: 4 additions."""
    return [b.add(b.add(x[0], x[1]), x[2]), b.sub(b.sub(x[1], x[2]), x[3])]


def trans_from_image_kernel(shape: ConvShape, plan: WinogradPlan) -> KernelProgram:
    """V[e][c][t] = (BT d BTᵀ)[e] for every overlapping 4x4 input patch d."""
    b = KernelBuilder("trans_from_image")
    wg, ty, tx, live = _tile_coords(plan)
    c = A(0, gid_z=1)
    t = ty * plan.tiles_x + tx
    d = [[0] * ALPHA for _ in range(ALPHA)]
    for i in range(ALPHA):
        for j in range(ALPHA):
            iy, ix = ty * M + (i - shape.pad), tx * M + (j - shape.pad)
            d[i][j] = b.ld_global(Buffer.INPUT, input_word(shape, c, iy, ix) * WORD, RegKind.IMAGE,
                                  live & image_guard(shape, iy, ix))
    cols = [_bt_pass(b, [d[i][j] for i in range(ALPHA)]) for j in range(ALPHA)]
    v = [_bt_pass(b, [cols[j][i] for j in range(ALPHA)]) for i in range(ALPHA)]
    for i in range(ALPHA):
        for j in range(ALPHA):
            word = (c + A((i * ALPHA + j) * shape.C)) * plan.tiles + t
            b.st_global(Buffer.V, word * WORD, v[i][j], live)
    grid = (ceil_div(plan.tiles_x, wg[0]), ceil_div(plan.tiles_y, wg[1]), shape.C)
    return b.build(wg, grid)


def trans_to_output_kernel(shape: ConvShape, plan: WinogradPlan) -> KernelProgram:
    """2x2 output tile = AT m ATᵀ from the 16 batched GEMM results of one (tile, k)."""
    b = KernelBuilder("trans_to_output")
    wg, ty, tx, live = _tile_coords(plan)
    k = A(0, gid_z=1)
    t = ty * plan.tiles_x + tx
    m = [[b.ld_global(Buffer.M, ((k + A((i * ALPHA + j) * shape.K)) * plan.tiles + t) * WORD, RegKind.TEMP, live)
          for j in range(ALPHA)] for i in range(ALPHA)]
    cols = [_at_pass(b, [m[i][j] for i in range(ALPHA)]) for j in range(ALPHA)]
    y = [_at_pass(b, [cols[j][i] for j in range(ALPHA)]) for i in range(M)]
    for i in range(M):
        for j in range(M):
            oy, ox = ty * M + i, tx * M + j
            guard = live & bound(oy, 0, shape.out_h) & bound(ox, 0, shape.out_w)
            b.st_global(Buffer.OUTPUT, ((k * shape.out_h + oy) * shape.out_w + ox) * WORD, y[i][j], guard)
    grid = (ceil_div(plan.tiles_x, wg[0]), ceil_div(plan.tiles_y, wg[1]), shape.K)
    return b.build(wg, grid)


def lower_winograd(shape: ConvShape, cfg: AlgoConfig) -> Pipeline:
    plan = WinogradPlan.for_shape(shape)
    t = plan.tiles
    gemm = gemm_kernel(
        "gemm", shape.K, t, shape.C,
        Operand(Buffer.U, shape.C, shape.K * shape.C, RegKind.FILTER),
        Operand(Buffer.V, t, shape.C * t, RegKind.IMAGE),
        Operand(Buffer.M, t, shape.K * t),
        cfg.gemm_tile_m, cfg.gemm_tile_n, cfg.gemm_tile_k, batch=ELEMENTS,
    )
    return Pipeline((trans_from_image_kernel(shape, plan), gemm, trans_to_output_kernel(shape, plan)))

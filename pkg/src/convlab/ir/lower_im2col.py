from __future__ import annotations

from ..core.models import AlgoConfig, ConvShape, ceil_div
from .builder import KernelBuilder
from .lower_gemm import Operand, gemm_kernel
from .lower_tiles import WORD, A, image_guard, input_word, output_guard
from .program import Buffer, KernelProgram, Pipeline, RegKind

IM2COL_TILE = 16
# row/column window offsets and the destination row index
INDEX_OPS = 2


def im2col_kernel(shape: ConvShape) -> KernelProgram:
    """Index arithmetic and a global copy; one thread per output pixel per channel, no shared memory."""
    wx, wy = min(IM2COL_TILE, shape.out_w), min(IM2COL_TILE, shape.out_h)
    st, p = shape.stride, shape.pad
    b = KernelBuilder("im2col")
    oy, ox = A(0, gid_y=wy, tid_y=1), A(0, gid_x=wx, tid_x=1)
    c = A(0, gid_z=1)
    live = output_guard(shape, oy, ox)
    with b.loop("r", shape.R):
        with b.loop("s", shape.S):
            base = None
            for _ in range(INDEX_OPS):
                base = b.ialu(() if base is None else (base,))
            iy, ix = oy * st + A(-p, r=1), ox * st + A(-p, s=1)
            v = b.ld_global(Buffer.INPUT, input_word(shape, c, iy, ix) * WORD, RegKind.IMAGE,
                            live & image_guard(shape, iy, ix), base=base)
            row = (c * shape.R + A(0, r=1)) * shape.S + A(0, s=1)
            b.st_global(Buffer.COL, (row * shape.out_pixels + oy * shape.out_w + ox) * WORD, v, live)
    grid = (ceil_div(shape.out_w, wx), ceil_div(shape.out_h, wy), shape.C)
    return b.build((wx, wy), grid)


def lower_im2col(shape: ConvShape, cfg: AlgoConfig) -> Pipeline:
    crs, px = shape.C * shape.taps, shape.out_pixels
    gemm = gemm_kernel(
        "gemm", shape.K, px, crs,
        Operand(Buffer.FILTER, crs, kind=RegKind.FILTER),
        Operand(Buffer.COL, px, kind=RegKind.IMAGE),
        Operand(Buffer.OUTPUT, px),
        cfg.gemm_tile_m, cfg.gemm_tile_n, cfg.gemm_tile_k,
    )
    return Pipeline((im2col_kernel(shape), gemm))

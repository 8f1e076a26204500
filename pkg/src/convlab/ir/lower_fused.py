from __future__ import annotations

from ..algos.tiling import TileGrid
from ..core.models import AlgoConfig, ConvShape, ceil_div
from .builder import KernelBuilder
from .lower_tiles import WORD, A, load_halo_2d, output_guard, output_pixel
from .program import Buffer, Pipeline, RegKind, bound

# window row/column, halo offset, destination row and column, destination address
UNROLL_INDEX_OPS = 6


def lower_fused(shape: ConvShape, cfg: AlgoConfig) -> Pipeline:
    """im2col fused into the GEMM: each workgroup unrolls its halo into a shared tile per channel.

    The halo and a gemm_tile_m x R*S filter tile are staged cooperatively, then every
    thread unrolls its own pixel's window and runs the tile's dot products.
    """
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    tx, ty, tm, st = cfg.tile_x, cfg.tile_y, cfg.gemm_tile_m, shape.stride
    taps, px = shape.taps, tx * ty
    filt_tile = grid.halo_pixels
    unrolled = filt_tile + tm * taps
    b = KernelBuilder("fused_unroll")
    acc = b.accumulators(tm)
    lin = A(0, tid_y=tx, tid_x=1)
    with b.loop("c", shape.C):
        c = A(0, c=1)
        load_halo_2d(b, grid, c, 0)
        with b.loop("fm", ceil_div(tm, ty)):
            with b.loop("fr", ceil_div(taps, tx)):
                m, rs = A(0, fm=ty, tid_y=1), A(0, fr=tx, tid_x=1)
                in_tile = bound(m, 0, tm) & bound(rs, 0, taps)
                word = ((m + A(0, gid_z=tm)) * shape.C + c) * taps + rs
                f = b.ld_global(Buffer.FILTER, word * WORD, RegKind.FILTER, in_tile)
                b.st_shared((m * taps + rs + filt_tile) * WORD, f, in_tile)
        b.barrier()
        for r in range(shape.R):
            for s in range(shape.S):
                idx = None
                for _ in range(UNROLL_INDEX_OPS):
                    idx = b.ialu(() if idx is None else (idx,))
                v = b.ld_shared(A(r * grid.halo_w + s, tid_y=st * grid.halo_w, tid_x=st) * WORD, RegKind.IMAGE)
                b.st_shared((lin + unrolled + (r * shape.S + s) * px) * WORD, v)
        # each thread consumes only the column it unrolled
        for mi in range(tm):
            for rs in range(taps):
                f = b.ld_shared(A(filt_tile + mi * taps + rs) * WORD, RegKind.FILTER)
                x = b.ld_shared((lin + unrolled + rs * px) * WORD, RegKind.IMAGE)
                b.fma(acc[mi], f, x)
        b.barrier()
    oy, ox = output_pixel(grid, A(0, tid_y=1), A(0, tid_x=1))
    for mi in range(tm):
        word = (A(mi, gid_z=tm) * shape.out_h + oy) * shape.out_w + ox
        b.st_global(Buffer.OUTPUT, word * WORD, acc[mi], output_guard(shape, oy, ox))
    shared_words = grid.halo_pixels + tm * taps + taps * px
    kernel = b.build((tx, ty), (grid.tiles_x, grid.tiles_y, shape.K // tm), shared_words * WORD)
    return Pipeline((kernel,))

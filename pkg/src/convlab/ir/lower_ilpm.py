from __future__ import annotations

from ..algos.tiling import TileGrid
from ..core.models import AlgoConfig, ConvShape, ceil_div
from ..core.tensor import Layout
from .builder import KernelBuilder
from .lower_tiles import WORD, A, channel_pairs, load_halo_rows, output_guard, output_pixel
from .program import Affine, Buffer, Pipeline, RegKind, bound


def lower_ilpm(shape: ConvShape, cfg: AlgoConfig) -> Pipeline:
    """Threads own output channels and walk the tile's pixels.

    The filter is read CRSK so one tap of consecutive output channels is a
    contiguous row. Taps rotate through a single register: each one feeds an
    FMA per pixel accumulator and then the next tap is loaded into its place.
    Image values are broadcast from shared memory, one halo row segment per
    filter row, and reused across that row's taps.
    """
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    tx, ty, st, wg = cfg.tile_x, cfg.tile_y, shape.stride, cfg.workgroup_channels
    halo_words = grid.halo_pixels
    stage = 2 * halo_words
    pitch = wg + 1
    span = (tx - 1) * st + shape.S
    taps = shape.C * shape.R * shape.S
    b = KernelBuilder("ilpm")
    acc = b.accumulators(tx * ty)
    k = A(0, gid_z=wg, tid_x=1)
    fb = b.ialu(uniform=True)
    f = b.ld_global(Buffer.FILTER, k * WORD, RegKind.FILTER, base=fb)

    def channel(c: Affine, parity: int) -> None:
        img = parity * halo_words
        load_halo_rows(b, grid, c, img, wg)
        b.barrier()
        with b.loop("r", shape.R):
            rows = [
                [b.ld_shared(A(img + py * st * grid.halo_w + j, r=grid.halo_w) * WORD, RegKind.IMAGE) for j in range(span)]
                for py in range(ty)
            ]
            for s in range(shape.S):
                for py, row in enumerate(rows):
                    for px in range(tx):
                        b.fma(acc[py * tx + px], f, row[px * st + s])
                nxt = (c * shape.R + A(0, r=1)) * shape.S + (s + 1)
                b.ld_global(Buffer.FILTER, (nxt * shape.K + k) * WORD, RegKind.FILTER, bound(nxt, 0, taps),
                            base=fb, into=f)

    channel_pairs(b, shape.C, channel)
    if cfg.transpose_output:
        _store_transposed(b, shape, grid, acc, stage, pitch, wg)
        shared_words = stage + tx * ty * pitch
    else:
        for py in range(ty):
            for px in range(tx):
                oy, ox = output_pixel(grid, py, px)
                word = (k * shape.out_h + oy) * shape.out_w + ox
                b.st_global(Buffer.OUTPUT, word * WORD, acc[py * tx + px], output_guard(shape, oy, ox))
        shared_words = stage
    kernel = b.build((wg, 1), (grid.tiles_x, grid.tiles_y, shape.K // wg), shared_words * WORD)
    return Pipeline((kernel,), filter_layout=Layout.CRSK.value)


def _store_transposed(b: KernelBuilder, shape: ConvShape, grid: TileGrid, acc: list[int],
                      stage: int, pitch: int, wg: int) -> None:
    """Stage accumulators as [pixel][channel], then store pixel-contiguous rows per channel."""
    tx, ty = grid.tile_x, grid.tile_y
    for p, reg in enumerate(acc):
        b.st_shared(A(stage + p * pitch, tid_x=1) * WORD, reg)
    b.barrier()
    plane = shape.out_h * shape.out_w
    with b.loop("kk", wg):
        k_word = A(0, gid_z=wg * plane, kk=plane)
        if tx == shape.out_w:
            # tile rows are contiguous in the output plane
            with b.loop("q", ceil_div(tx * ty, wg)):
                q = A(0, q=wg, tid_x=1)
                offset = A(0, gid_y=ty * shape.out_w) + q
                v = b.ld_shared((q * pitch + A(stage, kk=1)) * WORD, RegKind.TEMP, bound(q, 0, tx * ty))
                b.st_global(Buffer.OUTPUT, (k_word + offset) * WORD, v, bound(q, 0, tx * ty) & bound(offset, 0, plane))
        else:
            with b.loop("py", ty):
                with b.loop("q", ceil_div(tx, wg)):
                    col = A(0, q=wg, tid_x=1)
                    oy, ox = output_pixel(grid, A(0, py=1), col)
                    in_tile = bound(col, 0, tx)
                    v = b.ld_shared(((A(0, py=tx) + col) * pitch + A(stage, kk=1)) * WORD, RegKind.TEMP, in_tile)
                    b.st_global(Buffer.OUTPUT, (k_word + oy * shape.out_w + ox) * WORD, v,
                                in_tile & output_guard(shape, oy, ox))

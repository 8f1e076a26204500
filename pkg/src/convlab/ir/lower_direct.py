from __future__ import annotations

from ..algos.tiling import TileGrid
from ..core.models import AlgoConfig, ConvShape, ceil_div
from .builder import KernelBuilder
from .lower_tiles import WORD, A, channel_pairs, load_halo_2d, output_guard, output_pixel
from .program import Affine, Buffer, Pipeline, RegKind, bound


def lower_direct(shape: ConvShape, cfg: AlgoConfig) -> Pipeline:
    """Direct convolution, one thread per output pixel, out_channels_per_thread accumulators each.

    Per input channel the halo is staged in one of two shared buffers. The cached
    variant also stages each output channel's R x S filter slice and synchronizes
    once per slice; the uncached variant reads filter taps straight from global
    memory after a single barrier.
    """
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    tx, ty, st = cfg.tile_x, cfg.tile_y, shape.stride
    ocpt, taps, n_threads = cfg.out_channels_per_thread, shape.taps, tx * ty
    halo_words = grid.halo_pixels
    filter_base = 2 * halo_words
    b = KernelBuilder("direct_cache" if cfg.cache_filter else "direct_nocache")
    acc = b.accumulators(ocpt)
    lin = A(0, tid_y=tx, tid_x=1)

    def channel(c: Affine, parity: int) -> None:
        img = parity * halo_words
        load_halo_2d(b, grid, c, img)
        if not cfg.cache_filter:
            b.barrier()
        for o in range(ocpt):
            k = A(o, gid_z=ocpt)
            filt_row = (k * shape.C + c) * taps
            if cfg.cache_filter:
                slot = filter_base + (parity * ocpt + o) * taps
                with b.loop("fl", ceil_div(taps, n_threads)):
                    idx = lin + A(0, fl=n_threads)
                    f = b.ld_global(Buffer.FILTER, (filt_row + idx) * WORD, RegKind.FILTER, bound(idx, 0, taps))
                    b.st_shared((idx + slot) * WORD, f, bound(idx, 0, taps))
                b.barrier()
            else:
                fb = b.ialu(uniform=True)
            for r in range(shape.R):
                for s in range(shape.S):
                    rs = r * shape.S + s
                    if cfg.cache_filter:
                        f = b.ld_shared(A(slot + rs) * WORD, RegKind.FILTER)
                    else:
                        f = b.ld_global(Buffer.FILTER, (filt_row + rs) * WORD, RegKind.FILTER, base=fb)
                    x = b.ld_shared(A(img + r * grid.halo_w + s, tid_y=st * grid.halo_w, tid_x=st) * WORD, RegKind.IMAGE)
                    b.fma(acc[o], f, x)

    channel_pairs(b, shape.C, channel)
    oy, ox = output_pixel(grid, A(0, tid_y=1), A(0, tid_x=1))
    for o in range(ocpt):
        word = (A(o, gid_z=ocpt) * shape.out_h + oy) * shape.out_w + ox
        b.st_global(Buffer.OUTPUT, word * WORD, acc[o], output_guard(shape, oy, ox))
    shared_words = 2 * halo_words + (2 * ocpt * taps if cfg.cache_filter else 0)
    kernel = b.build((tx, ty), (grid.tiles_x, grid.tiles_y, shape.K // ocpt), shared_words * WORD)
    return Pipeline((kernel,))

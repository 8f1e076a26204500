from __future__ import annotations

import numpy as np

from ..core.models import AlgoConfig, Algorithm, ConvShape
from ..core.tensor import Tensor, check_operands, feature_map
from .counts import AlgoCounts, AlgoResult, OpCounts
from .oracle import padded_input
from .tiling import TileGrid


def direct_barriers(shape: ConvShape, cfg: AlgoConfig) -> int:
    """Barriers one workgroup executes: per input channel, and per cached filter slice when caching."""
    if cfg.cache_filter:
        return shape.C * cfg.out_channels_per_thread
    return shape.C


def direct_counts(shape: ConvShape, cfg: AlgoConfig) -> AlgoCounts:
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    groups = shape.K // cfg.out_channels_per_thread
    # every spatial tile re-reads the whole filter bank
    filter_read = grid.count * shape.filter_bytes
    input_read = groups * shape.C * grid.inbounds_halo_pixels() * 4
    macs = shape.mac_count
    return AlgoCounts(
        stages={"conv": OpCounts(macs, macs, filter_read + input_read, shape.output_bytes)},
        barriers=direct_barriers(shape, cfg),
        extra={"filter_read_bytes": filter_read, "input_read_bytes": input_read},
    )


def direct_conv(inp: Tensor, filters: Tensor, shape: ConvShape, cfg: AlgoConfig | None = None) -> AlgoResult:
    """Sliding-window convolution with one thread per output pixel of a tile.

    Each workgroup owns a tile and `out_channels_per_thread` output channels. Per
    input channel it stages the input halo in shared memory, then every thread
    accumulates its pixel into private accumulators. Filter values are either
    staged through shared memory per output channel or read directly.
    """
    cfg = cfg or AlgoConfig(Algorithm.DIRECT_NOCACHE)
    cfg.validate(shape, max_workgroup=1 << 30)
    check_operands(inp, filters, shape)
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    ocpt, tx, ty, st = cfg.out_channels_per_thread, cfg.tile_x, cfg.tile_y, shape.stride
    x = padded_input(inp.data, shape, np.float32)
    x = np.pad(x, ((0, 0), (0, grid.tiles_y * ty * st + shape.R), (0, grid.tiles_x * tx * st + shape.S)))
    w = filters.data
    out = np.zeros((shape.K, grid.tiles_y * ty, grid.tiles_x * tx), dtype=np.float32)
    for i in range(grid.tiles_y):
        for j in range(grid.tiles_x):
            y0, x0 = i * ty * st, j * tx * st
            for k0 in range(0, shape.K, ocpt):
                acc = np.zeros((ocpt, ty, tx), dtype=np.float32)
                for c in range(shape.C):
                    img_shared = x[c, y0 : y0 + grid.halo_h, x0 : x0 + grid.halo_w]
                    for o in range(ocpt):
                        filt = w[k0 + o, c]
                        for r in range(shape.R):
                            for s in range(shape.S):
                                acc[o] += filt[r, s] * img_shared[r : r + st * (ty - 1) + 1 : st, s : s + st * (tx - 1) + 1 : st]
                out[k0 : k0 + ocpt, i * ty : (i + 1) * ty, j * tx : (j + 1) * tx] = acc
    return AlgoResult(feature_map(out[:, : shape.out_h, : shape.out_w]), direct_counts(shape, cfg))

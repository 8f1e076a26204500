from __future__ import annotations

import numpy as np

from ..core.models import AlgoConfig, Algorithm, ConvShape
from ..core.tensor import Layout, Tensor, check_operands, feature_map
from .counts import AlgoCounts, AlgoResult, OpCounts
from .oracle import padded_input
from .tiling import TileGrid


def ilpm_barriers(shape: ConvShape, cfg: AlgoConfig) -> int:
    return shape.C + (1 if cfg.transpose_output else 0)


def ilpm_counts(shape: ConvShape, cfg: AlgoConfig) -> AlgoCounts:
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    groups = shape.K // cfg.workgroup_channels
    # one read per owning thread per spatial tile
    filter_read = grid.count * shape.filter_bytes
    input_read = groups * shape.C * grid.inbounds_halo_pixels() * 4
    crs = shape.C * shape.taps
    tile_px = cfg.tile_x * cfg.tile_y
    macs = shape.mac_count
    return AlgoCounts(
        stages={"conv": OpCounts(macs, macs, filter_read + input_read, shape.output_bytes)},
        barriers=ilpm_barriers(shape, cfg),
        extra={
            "filter_read_bytes": filter_read,
            "input_read_bytes": input_read,
            "thread_fma": crs * tile_px,
            "thread_filter_loads": crs,
        },
    )


def ilpm_conv(inp: Tensor, filters: Tensor, shape: ConvShape, cfg: AlgoConfig | None = None) -> AlgoResult:
    """Threads map to output channels and iterate over the pixels of a tile.

    Filters must be CRSK so that the threads of a workgroup read consecutive
    output channels of one (c, r, s) tap. Each tap is held in a single register
    and multiplied into every pixel accumulator of the tile.
    """
    cfg = cfg or AlgoConfig(Algorithm.ILPM)
    cfg.validate(shape, max_workgroup=1 << 30)
    check_operands(inp, filters, shape, layout=Layout.CRSK)
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    wg, tx, ty, st = cfg.workgroup_channels, cfg.tile_x, cfg.tile_y, shape.stride
    x = padded_input(inp.data, shape, np.float32)
    x = np.pad(x, ((0, 0), (0, grid.tiles_y * ty * st + shape.R), (0, grid.tiles_x * tx * st + shape.S)))
    w = filters.data
    out = np.zeros((shape.K, grid.tiles_y * ty, grid.tiles_x * tx), dtype=np.float32)
    for i in range(grid.tiles_y):
        for j in range(grid.tiles_x):
            y0, x0 = i * ty * st, j * tx * st
            for k0 in range(0, shape.K, wg):
                acc = np.zeros((wg, ty, tx), dtype=np.float32)
                for c in range(shape.C):
                    img_shared = x[c, y0 : y0 + grid.halo_h, x0 : x0 + grid.halo_w]
                    for r in range(shape.R):
                        for s in range(shape.S):
                            filter_reg = w[c, r, s, k0 : k0 + wg]
                            window = img_shared[r : r + st * (ty - 1) + 1 : st, s : s + st * (tx - 1) + 1 : st]
                            acc += filter_reg[:, None, None] * window[None]
                out[k0 : k0 + wg, i * ty : (i + 1) * ty, j * tx : (j + 1) * tx] = acc
    return AlgoResult(feature_map(out[:, : shape.out_h, : shape.out_w]), ilpm_counts(shape, cfg))

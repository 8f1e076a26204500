from __future__ import annotations

import numpy as np

from ..core.models import AlgoConfig, Algorithm, ConvShape
from ..core.tensor import Tensor, check_operands, feature_map
from .counts import AlgoCounts, AlgoResult, OpCounts
from .oracle import padded_input
from .tiling import TileGrid

# barriers per input channel: after the cooperative loads, before the buffers are reused
BARRIERS_PER_CHANNEL = 2


def fused_counts(shape: ConvShape, cfg: AlgoConfig) -> AlgoCounts:
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    groups = shape.K // cfg.gemm_tile_m
    crs = shape.C * shape.taps
    filter_read = grid.count * shape.K * crs * 4
    input_read = groups * shape.C * grid.inbounds_halo_pixels() * 4
    macs = shape.mac_count
    return AlgoCounts(
        stages={"conv": OpCounts(macs, macs, filter_read + input_read, shape.output_bytes)},
        barriers=BARRIERS_PER_CHANNEL * shape.C,
        unroll_elements=groups * grid.padded_threads() * crs,
    )


def fused_unroll_conv(inp: Tensor, filters: Tensor, shape: ConvShape, cfg: AlgoConfig | None = None) -> AlgoResult:
    """Unrolled tiles are built per workgroup from its input halo and consumed immediately."""
    cfg = cfg or AlgoConfig(Algorithm.FUSED_UNROLL)
    cfg.validate(shape, max_workgroup=1 << 30)
    check_operands(inp, filters, shape)
    grid = TileGrid(shape, cfg.tile_x, cfg.tile_y)
    tm, tx, ty, st = cfg.gemm_tile_m, cfg.tile_x, cfg.tile_y, shape.stride
    x = padded_input(inp.data, shape, np.float32)
    # pad the far edges so edge tiles read zeros past the image
    x = np.pad(x, ((0, 0), (0, grid.tiles_y * ty * st + shape.R), (0, grid.tiles_x * tx * st + shape.S)))
    w = filters.data.reshape(shape.K, shape.C, shape.taps)
    out = np.zeros((shape.K, grid.tiles_y * ty, grid.tiles_x * tx), dtype=np.float32)
    for i in range(grid.tiles_y):
        for j in range(grid.tiles_x):
            y0, x0 = i * ty * st, j * tx * st
            halo = x[:, y0 : y0 + grid.halo_h, x0 : x0 + grid.halo_w]
            unrolled = np.empty((shape.C, shape.taps, ty * tx), dtype=np.float32)
            for r in range(shape.R):
                for s in range(shape.S):
                    unrolled[:, r * shape.S + s] = halo[:, r : r + st * (ty - 1) + 1 : st, s : s + st * (tx - 1) + 1 : st].reshape(shape.C, -1)
            for k0 in range(0, shape.K, tm):
                acc = np.zeros((tm, ty * tx), dtype=np.float32)
                for c in range(shape.C):
                    acc += w[k0 : k0 + tm, c] @ unrolled[c]
                out[k0 : k0 + tm, i * ty : (i + 1) * ty, j * tx : (j + 1) * tx] = acc.reshape(tm, ty, tx)
    result = out[:, : shape.out_h, : shape.out_w]
    return AlgoResult(feature_map(result), fused_counts(shape, cfg))

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.models import AlgoConfig, Algorithm, ConvShape
from ..core.tensor import Tensor, check_operands, feature_map, matrix
from .counts import AlgoCounts, AlgoResult, OpCounts
from .gemm import gemm, gemm_traffic
from .oracle import padded_input


@dataclass(frozen=True, eq=False)
class UnrolledMatrix:
    """C*R*S rows by OH*OW columns; column j holds the window under output pixel j."""

    matrix: Tensor

    @property
    def rows(self) -> int:
        return self.matrix.dims[0]

    @property
    def cols(self) -> int:
        return self.matrix.dims[1]

    @property
    def bytes(self) -> int:
        return self.rows * self.cols * 4


def unrolled_bytes(shape: ConvShape) -> int:
    return shape.C * shape.taps * shape.out_pixels * 4


def im2col_unroll(inp: Tensor, shape: ConvShape) -> UnrolledMatrix:
    x = padded_input(inp.data, shape, np.float32)
    oh, ow, st = shape.out_h, shape.out_w, shape.stride
    rows = np.empty((shape.C, shape.R, shape.S, oh, ow), dtype=np.float32)
    for r in range(shape.R):
        for s in range(shape.S):
            rows[:, r, s] = x[:, r : r + st * (oh - 1) + 1 : st, s : s + st * (ow - 1) + 1 : st]
    return UnrolledMatrix(matrix(rows.reshape(shape.C * shape.taps, oh * ow)))


def im2col_counts(shape: ConvShape, cfg: AlgoConfig) -> AlgoCounts:
    crs, p = shape.C * shape.taps, shape.out_pixels
    unrolled = unrolled_bytes(shape)
    gemm_read, gemm_write = gemm_traffic(shape.K, p, crs, cfg.gemm_tile_m, cfg.gemm_tile_n)
    macs = shape.mac_count
    return AlgoCounts(
        stages={
            "im2col": OpCounts(0, 0, shape.input_bytes, unrolled),
            "gemm": OpCounts(macs, macs, gemm_read, gemm_write),
        },
        unroll_elements=crs * p,
    )


def im2col_conv(inp: Tensor, filters: Tensor, shape: ConvShape, cfg: AlgoConfig | None = None) -> AlgoResult:
    cfg = cfg or AlgoConfig(Algorithm.IM2COL)
    check_operands(inp, filters, shape)
    cols = im2col_unroll(inp, shape)
    a = matrix(filters.data.reshape(shape.K, shape.C * shape.taps))
    out = gemm(a, cols.matrix, cfg.gemm_tile_m, cfg.gemm_tile_n, cfg.gemm_tile_k)
    return AlgoResult(feature_map(out.data.reshape(shape.K, shape.out_h, shape.out_w)), im2col_counts(shape, cfg))

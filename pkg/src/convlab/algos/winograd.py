from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.models import AlgoConfig, Algorithm, ConvShape, ceil_div
from ..core.tensor import Tensor, check_operands, feature_map
from ..errors import ConfigError
from .counts import AlgoCounts, AlgoResult, OpCounts
from .gemm import gemm_traffic
from .oracle import padded_input

# F(2x2, 3x3); every entry is dyadic, so float64 holds them exactly
BT = np.array(
    [
        [1, 0, -1, 0],
        [0, 1, 1, 0],
        [0, -1, 1, 0],
        [0, 1, 0, -1],
    ],
    dtype=np.float64,
)
G = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.5, 0.5, 0.5],
        [0.5, -0.5, 0.5],
        [0.0, 0.0, 1.0],
    ],
)
AT = np.array(
    [
        [1, 1, 1, 0],
        [0, 1, -1, -1],
    ],
    dtype=np.float64,
)

M, R = 2, 3
ALPHA = M + R - 1
ELEMENTS = ALPHA * ALPHA
# additions of one input tile transform (BT.d then .B) and one output transform
INPUT_TRANSFORM_ADDS = 32
OUTPUT_TRANSFORM_ADDS = 24


@dataclass(frozen=True)
class WinogradPlan:
    tiles_y: int
    tiles_x: int
    m: int = M
    r: int = R
    bt: np.ndarray = field(default=BT, repr=False, compare=False)
    g: np.ndarray = field(default=G, repr=False, compare=False)
    at: np.ndarray = field(default=AT, repr=False, compare=False)

    @property
    def tiles(self) -> int:
        return self.tiles_y * self.tiles_x

    @classmethod
    def for_shape(cls, shape: ConvShape) -> WinogradPlan:
        if (shape.R, shape.S, shape.pad, shape.stride) != (3, 3, 1, 1):
            raise ConfigError("winograd F(2x2,3x3) needs R=S=3, pad=1, stride=1")
        return cls(ceil_div(shape.out_h, M), ceil_div(shape.out_w, M))


def winograd_filter_transform(g: np.ndarray) -> np.ndarray:
    return G @ np.asarray(g, dtype=np.float64) @ G.T


def winograd_input_transform(d: np.ndarray) -> np.ndarray:
    return BT @ np.asarray(d, dtype=np.float64) @ BT.T


def winograd_output_transform(m: np.ndarray) -> np.ndarray:
    return AT @ np.asarray(m, dtype=np.float64) @ AT.T


def transformed_filters(filters: Tensor) -> np.ndarray:
    """U laid out as [16][K][C], computed offline since filters are constant at inference."""
    u = np.einsum("ar,kcrs,bs->abkc", G, filters.data.astype(np.float64), G)
    return u.reshape(ELEMENTS, *filters.dims[:2]).astype(np.float32)


def winograd_counts(shape: ConvShape, cfg: AlgoConfig) -> AlgoCounts:
    plan = WinogradPlan.for_shape(shape)
    t, c, k = plan.tiles, shape.C, shape.K
    v_bytes = ELEMENTS * c * t * 4
    m_bytes = ELEMENTS * k * t * 4
    hadamard = t * ELEMENTS * c * k
    gemm_read, _ = gemm_traffic(k, t, c, cfg.gemm_tile_m, cfg.gemm_tile_n)
    return AlgoCounts(
        stages={
            "trans_from_image": OpCounts(0, t * c * INPUT_TRANSFORM_ADDS, shape.input_bytes, v_bytes),
            "gemm": OpCounts(hadamard, hadamard, ELEMENTS * gemm_read, m_bytes),
            "trans_to_output": OpCounts(0, t * k * OUTPUT_TRANSFORM_ADDS, m_bytes, shape.output_bytes),
        },
        extra={"transformed_input_bytes": v_bytes, "hadamard_multiplies": hadamard},
    )


def input_tiles(inp: Tensor, shape: ConvShape, plan: WinogradPlan) -> np.ndarray:
    """Overlapping 4x4 input patches [C][tiles_y][tiles_x][4][4], zero beyond the image."""
    x = padded_input(inp.data, shape, np.float32)
    need_h, need_w = M * plan.tiles_y + 2, M * plan.tiles_x + 2
    x = np.pad(x, ((0, 0), (0, need_h - x.shape[1]), (0, need_w - x.shape[2])))
    view = np.lib.stride_tricks.sliding_window_view(x, (ALPHA, ALPHA), axis=(1, 2))
    return view[:, ::M, ::M][:, : plan.tiles_y, : plan.tiles_x]


def winograd_conv(inp: Tensor, filters: Tensor, shape: ConvShape, cfg: AlgoConfig | None = None) -> AlgoResult:
    cfg = cfg or AlgoConfig(Algorithm.WINOGRAD)
    plan = WinogradPlan.for_shape(shape)
    check_operands(inp, filters, shape)
    d = input_tiles(inp, shape, plan)
    v = np.einsum("ai,cyxij,bj->abcyx", BT, d.astype(np.float64), BT).astype(np.float32)
    u = transformed_filters(filters).reshape(ALPHA, ALPHA, shape.K, shape.C)
    # 16 independent (K x C) @ (C x tiles) products
    m = np.einsum("abkc,abcyx->abkyx", u, v)
    y = np.einsum("ia,abkyx,jb->kyixj", AT, m.astype(np.float64), AT)
    out = y.reshape(shape.K, plan.tiles_y * M, plan.tiles_x * M)[:, : shape.out_h, : shape.out_w]
    return AlgoResult(feature_map(out.astype(np.float32)), winograd_counts(shape, cfg))

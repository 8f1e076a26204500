from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.models import ConvShape
from ..core.tensor import Tensor, check_operands, feature_map


@dataclass(frozen=True, eq=False)
class OracleResult:
    output: Tensor
    mac_count: int


def padded_input(data: np.ndarray, shape: ConvShape, dtype=np.float64) -> np.ndarray:
    p = shape.pad
    return np.pad(data.astype(dtype), ((0, 0), (p, p), (p, p)))


def oracle_conv(inp: Tensor, filters: Tensor, shape: ConvShape) -> OracleResult:
    """Sliding-window convolution with zero padding, accumulated in float64."""
    check_operands(inp, filters, shape)
    x = padded_input(inp.data, shape)
    w = filters.data.astype(np.float64)
    oh, ow, st = shape.out_h, shape.out_w, shape.stride
    out = np.zeros((shape.K, oh, ow), dtype=np.float64)
    for r in range(shape.R):
        for s in range(shape.S):
            window = x[:, r : r + st * (oh - 1) + 1 : st, s : s + st * (ow - 1) + 1 : st]
            out += np.einsum("kc,chw->khw", w[:, :, r, s], window)
    return OracleResult(feature_map(out.astype(np.float32)), shape.mac_count)


def max_relative_error(got: np.ndarray, want: np.ndarray) -> float:
    """Max abs difference scaled by the reference's largest magnitude."""
    scale = max(float(np.max(np.abs(want))), 1e-12)
    return float(np.max(np.abs(got.astype(np.float64) - want.astype(np.float64)))) / scale

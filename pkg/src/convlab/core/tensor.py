from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import LayoutError, ShapeError
from .models import ConvShape


class Layout(str, Enum):
    CHW = "CHW"
    KCRS = "KCRS"
    CRSK = "CRSK"
    ROWMAJOR = "ROWMAJOR"

    @property
    def rank(self) -> int:
        return 2 if self is Layout.ROWMAJOR else len(self.value)


# axis permutation taking a KCRS array to CRSK order and back
_KCRS_TO_CRSK = (1, 2, 3, 0)
_CRSK_TO_KCRS = (3, 0, 1, 2)


@dataclass(frozen=True, eq=False)
class Tensor:
    """Dense fp32 array whose axis order is spelled by `layout`."""

    layout: Layout
    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != self.layout.rank:
            raise LayoutError(f"{self.layout.value} tensor needs rank {self.layout.rank}, got {arr.ndim}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def equals(self, other: Tensor) -> bool:
        return self.layout is other.layout and self.dims == other.dims and bool(np.array_equal(self.data, other.data))


def feature_map(data: np.ndarray) -> Tensor:
    return Tensor(Layout.CHW, data)


def filter_bank(data: np.ndarray, layout: Layout = Layout.KCRS) -> Tensor:
    return Tensor(layout, data)


def matrix(data: np.ndarray) -> Tensor:
    return Tensor(Layout.ROWMAJOR, data)


def convert_layout(t: Tensor, target: Layout) -> Tensor:
    """Lossless re-ordering between the two filter-bank layouts."""
    source = t.layout
    if source is target:
        return t
    if source is Layout.KCRS and target is Layout.CRSK:
        return Tensor(target, np.transpose(t.data, _KCRS_TO_CRSK))
    if source is Layout.CRSK and target is Layout.KCRS:
        return Tensor(target, np.transpose(t.data, _CRSK_TO_KCRS))
    raise LayoutError(f"cannot convert {source.value} to {target.value}")


def filter_dims(t: Tensor) -> tuple[int, int, int, int]:
    """(K, C, R, S) of a filter bank in either filter layout."""
    if t.layout is Layout.KCRS:
        k, c, r, s = t.dims
    elif t.layout is Layout.CRSK:
        c, r, s, k = t.dims
    else:
        raise LayoutError(f"{t.layout.value} is not a filter layout")
    return k, c, r, s


def check_operands(inp: Tensor, filters: Tensor, shape: ConvShape, layout: Layout = Layout.KCRS) -> None:
    if inp.layout is not Layout.CHW:
        raise LayoutError(f"input must be CHW, got {inp.layout.value}")
    if filters.layout is not layout:
        raise LayoutError(f"filters must be {layout.value}, got {filters.layout.value}")
    if inp.dims != (shape.C, shape.H, shape.W):
        raise ShapeError(f"input dims {inp.dims} do not match C,H,W={(shape.C, shape.H, shape.W)}")
    if filter_dims(filters) != (shape.K, shape.C, shape.R, shape.S):
        raise ShapeError(f"filter dims {filter_dims(filters)} do not match K,C,R,S={(shape.K, shape.C, shape.R, shape.S)}")


def random_operands(shape: ConvShape, rng: np.random.Generator) -> tuple[Tensor, Tensor]:
    inp = rng.standard_normal((shape.C, shape.H, shape.W), dtype=np.float32)
    filters = rng.standard_normal((shape.K, shape.C, shape.R, shape.S), dtype=np.float32)
    return feature_map(inp), filter_bank(filters)

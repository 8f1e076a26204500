from __future__ import annotations

import numpy as np

from ..core.models import ceil_div
from ..core.tensor import Layout, Tensor, matrix
from ..errors import ConfigError, LayoutError, ShapeError


def _pad_to(a: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.pad(a, ((0, rows - a.shape[0]), (0, cols - a.shape[1])))


def gemm(a: Tensor, b: Tensor, tile_m: int = 16, tile_n: int = 16, tile_k: int = 16) -> Tensor:
    """Tiled C = A @ B with the k loop innermost, both operands zero-padded to tile multiples."""
    if a.layout is not Layout.ROWMAJOR or b.layout is not Layout.ROWMAJOR:
        raise LayoutError("gemm operands must be ROWMAJOR matrices")
    if min(tile_m, tile_n, tile_k) < 1:
        raise ConfigError("gemm tiles must be >= 1")
    m, k = a.dims
    k2, n = b.dims
    if k != k2:
        raise ShapeError(f"inner dimensions differ: {a.dims} @ {b.dims}")
    mp, np_, kp = ceil_div(m, tile_m) * tile_m, ceil_div(n, tile_n) * tile_n, ceil_div(k, tile_k) * tile_k
    ap = _pad_to(a.data, mp, kp)
    bp = _pad_to(b.data, kp, np_)
    out = np.zeros((mp, np_), dtype=np.float32)
    for i0 in range(0, mp, tile_m):
        for j0 in range(0, np_, tile_n):
            acc = np.zeros((tile_m, tile_n), dtype=np.float32)
            for k0 in range(0, kp, tile_k):
                acc += ap[i0 : i0 + tile_m, k0 : k0 + tile_k] @ bp[k0 : k0 + tile_k, j0 : j0 + tile_n]
            out[i0 : i0 + tile_m, j0 : j0 + tile_n] = acc
    return matrix(out[:m, :n])


def gemm_traffic(m: int, n: int, k: int, tile_m: int, tile_n: int) -> tuple[int, int]:
    """(read, write) bytes of a tiled GEMM: A re-read per column of tiles, B per row of tiles."""
    read = m * k * 4 * ceil_div(n, tile_n) + k * n * 4 * ceil_div(m, tile_m)
    return read, m * n * 4

"""Address and cooperative-load helpers shared by the tiled lowerings."""

from __future__ import annotations

from collections.abc import Callable

from ..algos.tiling import TileGrid
from ..core.models import ConvShape, ceil_div
from .builder import KernelBuilder
from .program import Affine, Buffer, Guard, RegKind, bound

A = Affine.of
WORD = 4


def input_word(shape: ConvShape, c: Affine, iy: Affine, ix: Affine) -> Affine:
    return (c * shape.H + iy) * shape.W + ix


def image_guard(shape: ConvShape, iy: Affine, ix: Affine) -> Guard:
    return bound(iy, 0, shape.H) & bound(ix, 0, shape.W)


def tile_origin(grid: TileGrid) -> tuple[Affine, Affine]:
    """Input coordinate of the halo's top-left corner for the current workgroup."""
    st, p = grid.shape.stride, grid.shape.pad
    return A(-p, gid_y=grid.tile_y * st), A(-p, gid_x=grid.tile_x * st)


def output_pixel(grid: TileGrid, py: Affine | int, px: Affine | int) -> tuple[Affine, Affine]:
    return A(0, gid_y=grid.tile_y) + py, A(0, gid_x=grid.tile_x) + px


def output_guard(shape: ConvShape, oy: Affine, ox: Affine) -> Guard:
    return bound(oy, 0, shape.out_h) & bound(ox, 0, shape.out_w)


def _halo_copy(b: KernelBuilder, grid: TileGrid, c: Affine, shared_word: int, row: Affine, col: Affine) -> None:
    shape = grid.shape
    y0, x0 = tile_origin(grid)
    iy, ix = y0 + row, x0 + col
    in_tile = bound(row, 0, grid.halo_h) & bound(col, 0, grid.halo_w)
    value = b.ld_global(Buffer.INPUT, input_word(shape, c, iy, ix) * WORD, RegKind.IMAGE, in_tile & image_guard(shape, iy, ix))
    # out-of-image halo cells still get their zero written
    b.st_shared((row * grid.halo_w + col + shared_word) * WORD, value, in_tile)


def load_halo_2d(b: KernelBuilder, grid: TileGrid, c: Affine, shared_word: int) -> None:
    """Workgroup of tile_x x tile_y threads copies one channel's halo into shared memory."""
    tx, ty = grid.tile_x, grid.tile_y
    with b.loop("hy", ceil_div(grid.halo_h, ty)):
        with b.loop("hx", ceil_div(grid.halo_w, tx)):
            _halo_copy(b, grid, c, shared_word, A(0, hy=ty, tid_y=1), A(0, hx=tx, tid_x=1))


def load_halo_rows(b: KernelBuilder, grid: TileGrid, c: Affine, shared_word: int, width: int) -> None:
    """One-dimensional workgroup of `width` threads copies the halo row by row."""
    with b.loop("hy", grid.halo_h):
        with b.loop("hx", ceil_div(grid.halo_w, width)):
            _halo_copy(b, grid, c, shared_word, A(0, hy=1), A(0, hx=width, tid_x=1))


def channel_pairs(b: KernelBuilder, channels: int, body: Callable[[Affine, int], None]) -> None:
    """Call body(channel, parity) for every input channel, unrolled by two over buffer parity."""
    pairs, odd = divmod(channels, 2)
    with b.loop("cp", pairs):
        body(A(0, cp=2), 0)
        body(A(1, cp=2), 1)
    if odd:
        body(A(channels - 1), 0)

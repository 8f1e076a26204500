from __future__ import annotations

from dataclasses import dataclass

from ..core.models import ConvShape, ceil_div


def _overlap(start: int, length: int, size: int) -> int:
    return max(0, min(start + length, size) - max(start, 0))


@dataclass(frozen=True)
class TileGrid:
    """Output tiles of tile_y x tile_x pixels and the input halo each one reads."""

    shape: ConvShape
    tile_x: int
    tile_y: int

    @property
    def tiles_x(self) -> int:
        return ceil_div(self.shape.out_w, self.tile_x)

    @property
    def tiles_y(self) -> int:
        return ceil_div(self.shape.out_h, self.tile_y)

    @property
    def count(self) -> int:
        return self.tiles_x * self.tiles_y

    @property
    def halo_w(self) -> int:
        return (self.tile_x - 1) * self.shape.stride + self.shape.S

    @property
    def halo_h(self) -> int:
        return (self.tile_y - 1) * self.shape.stride + self.shape.R

    @property
    def halo_pixels(self) -> int:
        return self.halo_w * self.halo_h

    def origin(self, ty: int, tx: int) -> tuple[int, int]:
        """Top-left input coordinate of tile (ty, tx), possibly negative inside the padding."""
        st, p = self.shape.stride, self.shape.pad
        return ty * self.tile_y * st - p, tx * self.tile_x * st - p

    def inbounds_halo_pixels(self) -> int:
        """Halo pixels summed over all tiles, counting only those inside the image."""
        rows = sum(_overlap(self.origin(i, 0)[0], self.halo_h, self.shape.H) for i in range(self.tiles_y))
        cols = sum(_overlap(self.origin(0, j)[1], self.halo_w, self.shape.W) for j in range(self.tiles_x))
        return rows * cols

    def padded_threads(self) -> int:
        return self.count * self.tile_x * self.tile_y

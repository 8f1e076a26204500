from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from ..core.models import ConvShape
from ..errors import UsageError

DEPTHS = (18, 34, 50, 101, 152)


@dataclass(frozen=True)
class LayerSpec:
    """A 3x3 convolution layer of ResNet with C = K channels on an H x W map.

    `repeats[depth]` is (3x3 convolutions per block, blocks) at that network depth.
    """

    name: str
    channels: int
    size: int
    repeats: Mapping[int, tuple[int, int]]

    def shape(self, scale: int | None = None) -> ConvShape:
        """Full-size shape, or with C = K cut down to `scale` channels."""
        channels = self.channels if scale is None else min(scale, self.channels)
        return ConvShape(channels, channels, self.size, self.size)

    def count(self, depth: int) -> int:
        per_block, blocks = self.repeats[depth]
        return per_block * blocks


def _repeats(*pairs: tuple[int, int]) -> dict[int, tuple[int, int]]:
    return dict(zip(DEPTHS, pairs, strict=True))


RESNET_LAYERS = (
    LayerSpec("conv2.x", 64, 56, _repeats((2, 2), (2, 3), (1, 3), (1, 3), (1, 3))),
    LayerSpec("conv3.x", 128, 28, _repeats((2, 2), (2, 4), (1, 4), (1, 4), (1, 8))),
    LayerSpec("conv4.x", 256, 14, _repeats((2, 2), (2, 6), (1, 6), (1, 23), (1, 36))),
    LayerSpec("conv5.x", 512, 7, _repeats((2, 2), (2, 4), (1, 3), (1, 3), (1, 3))),
)


def layer(name: str) -> LayerSpec:
    for spec in RESNET_LAYERS:
        if spec.name == name:
            return spec
    raise UsageError(f"unknown layer {name!r}; choose from {', '.join(s.name for s in RESNET_LAYERS)}")


def network_cycles(depth: int, cycles_by_layer: Mapping[str, int]) -> int:
    """3x3-convolution cycles of a whole ResNet-`depth` forward pass."""
    if depth not in DEPTHS:
        raise UsageError(f"ResNet depth must be one of {DEPTHS}, got {depth}")
    missing = [s.name for s in RESNET_LAYERS if s.name not in cycles_by_layer]
    if missing:
        raise UsageError(f"no cycles for {', '.join(missing)}")
    return sum(s.count(depth) * cycles_by_layer[s.name] for s in RESNET_LAYERS)

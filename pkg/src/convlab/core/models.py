from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from enum import Enum

from ..errors import ConfigError, ShapeError


class Algorithm(str, Enum):
    ORACLE = "oracle"
    IM2COL = "im2col"
    FUSED_UNROLL = "fused_unroll"
    WINOGRAD = "winograd"
    DIRECT_CACHE = "direct_cache"
    DIRECT_NOCACHE = "direct_nocache"
    ILPM = "ilpm"

    @property
    def is_direct(self) -> bool:
        return self in (Algorithm.DIRECT_CACHE, Algorithm.DIRECT_NOCACHE)

    @property
    def uses_gemm(self) -> bool:
        return self in (Algorithm.IM2COL, Algorithm.WINOGRAD)


@dataclass(frozen=True)
class ConvShape:
    """Single-image convolution problem: C input channels, K filters of R x S."""

    in_channels: int
    out_channels: int
    height: int
    width: int
    filter_h: int = 3
    filter_w: int = 3
    pad: int = 1
    stride: int = 1

    def __post_init__(self) -> None:
        for name in ("in_channels", "out_channels", "height", "width", "filter_h", "filter_w", "stride"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.pad < 0:
            raise ShapeError(f"pad must be >= 0, got {self.pad}")
        _extent(self.height, self.filter_h, self.pad, self.stride, "height")
        _extent(self.width, self.filter_w, self.pad, self.stride, "width")

    @property
    def C(self) -> int:
        return self.in_channels

    @property
    def K(self) -> int:
        return self.out_channels

    @property
    def H(self) -> int:
        return self.height

    @property
    def W(self) -> int:
        return self.width

    @property
    def R(self) -> int:
        return self.filter_h

    @property
    def S(self) -> int:
        return self.filter_w

    @property
    def out_h(self) -> int:
        return _extent(self.height, self.filter_h, self.pad, self.stride, "height")

    @property
    def out_w(self) -> int:
        return _extent(self.width, self.filter_w, self.pad, self.stride, "width")

    @property
    def out_pixels(self) -> int:
        return self.out_h * self.out_w

    @property
    def taps(self) -> int:
        return self.filter_h * self.filter_w

    @property
    def mac_count(self) -> int:
        return self.K * self.out_pixels * self.C * self.taps

    @property
    def input_bytes(self) -> int:
        return self.C * self.H * self.W * 4

    @property
    def filter_bytes(self) -> int:
        return self.K * self.C * self.taps * 4

    @property
    def output_bytes(self) -> int:
        return self.K * self.out_pixels * 4

    def with_channels(self, channels: int) -> ConvShape:
        return replace(self, in_channels=channels, out_channels=channels)


def _extent(size: int, filt: int, pad: int, stride: int, axis: str) -> int:
    span = size + 2 * pad - filt
    if span < 0:
        raise ShapeError(f"filter larger than padded {axis}: {size}+2*{pad} < {filt}")
    if span % stride:
        raise ShapeError(f"{axis}: ({size}+2*{pad}-{filt}) not divisible by stride {stride}")
    return span // stride + 1


def output_shape(shape: ConvShape) -> tuple[int, int]:
    return shape.out_h, shape.out_w


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class AlgoConfig:
    algorithm: Algorithm
    tile_x: int = 7
    tile_y: int = 7
    out_channels_per_thread: int = 1
    gemm_tile_m: int = 16
    gemm_tile_n: int = 16
    gemm_tile_k: int = 16
    cache_filter: bool | None = None
    transpose_output: bool = False
    workgroup_channels: int = 32

    def __post_init__(self) -> None:
        if not isinstance(self.algorithm, Algorithm):
            object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.algorithm.is_direct:
            # an explicit cache_filter picks the variant
            if self.cache_filter is None:
                object.__setattr__(self, "cache_filter", self.algorithm is Algorithm.DIRECT_CACHE)
            else:
                variant = Algorithm.DIRECT_CACHE if self.cache_filter else Algorithm.DIRECT_NOCACHE
                object.__setattr__(self, "algorithm", variant)
        elif self.cache_filter is None:
            object.__setattr__(self, "cache_filter", False)

    def validate(self, shape: ConvShape, max_workgroup: int = 256) -> None:
        """Raise ConfigError when this configuration cannot run `shape`."""
        fields = ("tile_x", "tile_y", "out_channels_per_thread", "gemm_tile_m",
                  "gemm_tile_n", "gemm_tile_k", "workgroup_channels")
        for name in fields:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        algo = self.algorithm
        if algo.is_direct:
            if self.tile_x * self.tile_y > max_workgroup:
                raise ConfigError(f"workgroup {self.tile_x}x{self.tile_y} exceeds {max_workgroup} threads")
            if shape.K % self.out_channels_per_thread:
                raise ConfigError(f"out_channels_per_thread {self.out_channels_per_thread} does not divide K={shape.K}")
        elif algo is Algorithm.ILPM:
            if self.workgroup_channels > max_workgroup:
                raise ConfigError(f"workgroup width {self.workgroup_channels} exceeds {max_workgroup} threads")
            if shape.K % self.workgroup_channels:
                raise ConfigError(f"K={shape.K} is not a multiple of workgroup width {self.workgroup_channels}")
        elif algo is Algorithm.FUSED_UNROLL:
            if self.tile_x * self.tile_y > max_workgroup:
                raise ConfigError(f"workgroup {self.tile_x}x{self.tile_y} exceeds {max_workgroup} threads")
            if shape.K % self.gemm_tile_m:
                raise ConfigError(f"gemm_tile_m {self.gemm_tile_m} does not divide K={shape.K}")
        elif algo.uses_gemm:
            if self.gemm_tile_m * self.gemm_tile_n > max_workgroup:
                raise ConfigError(f"gemm tile {self.gemm_tile_m}x{self.gemm_tile_n} exceeds {max_workgroup} threads")
        if algo is Algorithm.WINOGRAD and (shape.R, shape.S, shape.pad, shape.stride) != (3, 3, 1, 1):
            raise ConfigError("winograd F(2x2,3x3) needs R=S=3, pad=1, stride=1")

    def relevant(self) -> dict[str, object]:
        """Fields that influence this algorithm, in declaration order."""
        algo = self.algorithm
        if algo.is_direct:
            names = ("tile_x", "tile_y", "out_channels_per_thread", "cache_filter")
        elif algo is Algorithm.ILPM:
            names = ("tile_x", "tile_y", "workgroup_channels", "transpose_output")
        elif algo is Algorithm.FUSED_UNROLL:
            names = ("tile_x", "tile_y", "gemm_tile_m")
        elif algo.uses_gemm:
            names = ("gemm_tile_m", "gemm_tile_n", "gemm_tile_k")
        else:
            names = ()
        data = asdict(self)
        return {name: data[name] for name in names}

    def label(self) -> str:
        parts = [self.algorithm.value]
        for name, value in self.relevant().items():
            parts.append(f"{name}={int(value) if isinstance(value, bool) else value}")
        return " ".join(parts)

    def sort_key(self) -> tuple:
        return (self.algorithm.value, *(int(v) for v in self.relevant().values()))

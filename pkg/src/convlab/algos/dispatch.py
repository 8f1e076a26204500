from __future__ import annotations

from collections.abc import Callable

from ..core.models import AlgoConfig, Algorithm, ConvShape
from ..core.tensor import Layout, Tensor, convert_layout
from .counts import AlgoCounts, AlgoResult, OpCounts
from .direct import direct_conv, direct_counts
from .fused import fused_counts, fused_unroll_conv
from .ilpm import ilpm_conv, ilpm_counts
from .im2col import im2col_conv, im2col_counts
from .oracle import oracle_conv
from .winograd import winograd_conv, winograd_counts


def oracle_counts(shape: ConvShape, cfg: AlgoConfig) -> AlgoCounts:
    macs = shape.mac_count
    return AlgoCounts(
        stages={"conv": OpCounts(macs, macs, shape.input_bytes + shape.filter_bytes, shape.output_bytes)}
    )


def _oracle(inp: Tensor, filters: Tensor, shape: ConvShape, cfg: AlgoConfig) -> AlgoResult:
    return AlgoResult(oracle_conv(inp, filters, shape).output, oracle_counts(shape, cfg))


def _ilpm(inp: Tensor, filters: Tensor, shape: ConvShape, cfg: AlgoConfig) -> AlgoResult:
    return ilpm_conv(inp, convert_layout(filters, Layout.CRSK), shape, cfg)


_RUNNERS: dict[Algorithm, Callable[[Tensor, Tensor, ConvShape, AlgoConfig], AlgoResult]] = {
    Algorithm.ORACLE: _oracle,
    Algorithm.IM2COL: im2col_conv,
    Algorithm.FUSED_UNROLL: fused_unroll_conv,
    Algorithm.WINOGRAD: winograd_conv,
    Algorithm.DIRECT_CACHE: direct_conv,
    Algorithm.DIRECT_NOCACHE: direct_conv,
    Algorithm.ILPM: _ilpm,
}

_COUNTERS: dict[Algorithm, Callable[[ConvShape, AlgoConfig], AlgoCounts]] = {
    Algorithm.ORACLE: oracle_counts,
    Algorithm.IM2COL: im2col_counts,
    Algorithm.FUSED_UNROLL: fused_counts,
    Algorithm.WINOGRAD: winograd_counts,
    Algorithm.DIRECT_CACHE: direct_counts,
    Algorithm.DIRECT_NOCACHE: direct_counts,
    Algorithm.ILPM: ilpm_counts,
}


def run_algorithm(cfg: AlgoConfig, inp: Tensor, filters: Tensor, shape: ConvShape) -> AlgoResult:
    """Run `cfg` on KCRS filters, converting layout where the algorithm wants another."""
    cfg.validate(shape, max_workgroup=1 << 30)
    return _RUNNERS[cfg.algorithm](inp, filters, shape, cfg)


def counts_for(shape: ConvShape, cfg: AlgoConfig) -> AlgoCounts:
    cfg.validate(shape, max_workgroup=1 << 30)
    return _COUNTERS[cfg.algorithm](shape, cfg)

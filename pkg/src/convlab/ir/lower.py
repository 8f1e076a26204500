from __future__ import annotations

import logging
from collections.abc import Callable

from ..core.models import AlgoConfig, Algorithm, ConvShape
from ..errors import ConfigError
from .lower_direct import lower_direct
from .lower_fused import lower_fused
from .lower_ilpm import lower_ilpm
from .lower_im2col import lower_im2col
from .lower_winograd import lower_winograd
from .program import Pipeline, static_barriers

logger = logging.getLogger(__name__)

_LOWERINGS: dict[Algorithm, Callable[[ConvShape, AlgoConfig], Pipeline]] = {
    Algorithm.IM2COL: lower_im2col,
    Algorithm.FUSED_UNROLL: lower_fused,
    Algorithm.WINOGRAD: lower_winograd,
    Algorithm.DIRECT_CACHE: lower_direct,
    Algorithm.DIRECT_NOCACHE: lower_direct,
    Algorithm.ILPM: lower_ilpm,
}


def lower(cfg: AlgoConfig, shape: ConvShape, max_workgroup: int = 256) -> Pipeline:
    """Kernels that compute `shape` with `cfg`, in launch order."""
    if cfg.algorithm not in _LOWERINGS:
        raise ConfigError(f"{cfg.algorithm.value} has no kernel lowering")
    cfg.validate(shape, max_workgroup)
    pipeline = _LOWERINGS[cfg.algorithm](shape, cfg)
    for kernel in pipeline:
        logger.debug(
            "lowered %s: workgroup=%s grid=%s shared=%dB static_barriers=%d",
            kernel.name, kernel.workgroup_dims, kernel.grid_dims, kernel.shared_bytes, static_barriers(kernel),
        )
    return pipeline

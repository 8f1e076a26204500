from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from ..algos.dispatch import run_algorithm
from ..algos.oracle import max_relative_error, oracle_conv
from ..core.models import Algorithm, ConvShape
from ..core.tensor import random_operands
from ..errors import UsageError, VerificationError
from ..ir.interp import run_pipeline
from ..ir.lower import lower
from .layers import RESNET_LAYERS, LayerSpec
from .report import REPORT_ALGORITHMS, default_config

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
WINOGRAD_TOLERANCE = 1e-3
SCALES = (8, 16, 32, 64)


def tolerance(algorithm: Algorithm) -> float:
    return WINOGRAD_TOLERANCE if algorithm is Algorithm.WINOGRAD else TOLERANCE


@dataclass(frozen=True)
class CaseResult:
    layer: str
    shape: ConvShape
    algorithm: Algorithm
    error: float
    via_ir: bool = False

    @property
    def ok(self) -> bool:
        return self.error <= tolerance(self.algorithm)

    def describe(self) -> str:
        s = self.shape
        path = "kernels" if self.via_ir else "host"
        return (f"{self.layer} C={s.C} K={s.K} H={s.H} W={s.W} {self.algorithm.value} ({path}): "
                f"max relative error {self.error:.3e} > {tolerance(self.algorithm):.0e}")


def verify_layer(spec: LayerSpec, scale: int, rng: np.random.Generator,
                 algorithms: Iterable[Algorithm] = REPORT_ALGORITHMS, via_ir: bool = False) -> list[CaseResult]:
    shape = spec.shape(scale)
    inp, filters = random_operands(shape, rng)
    want = oracle_conv(inp, filters, shape).output.data
    results = []
    for algorithm in algorithms:
        cfg = default_config(algorithm, shape)
        if via_ir:
            got, _ = run_pipeline(lower(cfg, shape), shape, inp, filters)
        else:
            got = run_algorithm(cfg, inp, filters, shape).output
        result = CaseResult(spec.name, shape, algorithm, max_relative_error(got.data, want), via_ir)
        if not result.ok:
            logger.error("%s", result.describe())
        results.append(result)
    return results


def verify(seed: int, scale: int, layers: Iterable[LayerSpec] = RESNET_LAYERS,
           algorithms: Iterable[Algorithm] = REPORT_ALGORITHMS, via_ir: bool = False) -> list[CaseResult]:
    """Every algorithm against the oracle on every layer; raises on the first failing layer."""
    if scale not in SCALES:
        raise UsageError(f"scale must be one of {SCALES}, got {scale}")
    rng = np.random.default_rng(seed)
    algorithms = tuple(algorithms)
    results: list[CaseResult] = []
    for spec in layers:
        layer_results = verify_layer(spec, scale, rng, algorithms, via_ir)
        results.extend(layer_results)
        failed = [r for r in layer_results if not r.ok]
        if failed:
            raise VerificationError("; ".join(r.describe() for r in failed))
    return results

from __future__ import annotations

from dataclasses import dataclass, field

from ..core.tensor import Tensor


@dataclass(frozen=True)
class OpCounts:
    """Exact operation and traffic counts of one kernel stage.

    Traffic assumes 4 bytes per global load or store before any coalescing.
    """

    multiplies: int = 0
    adds: int = 0
    global_read_bytes_analytic: int = 0
    global_write_bytes_analytic: int = 0

    def __add__(self, other: OpCounts) -> OpCounts:
        return OpCounts(
            self.multiplies + other.multiplies,
            self.adds + other.adds,
            self.global_read_bytes_analytic + other.global_read_bytes_analytic,
            self.global_write_bytes_analytic + other.global_write_bytes_analytic,
        )


@dataclass(frozen=True)
class AlgoCounts:
    stages: dict[str, OpCounts]
    barriers: int = 0
    unroll_elements: int = 0
    extra: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> OpCounts:
        acc = OpCounts()
        for stage in self.stages.values():
            acc = acc + stage
        return acc

    @property
    def multiplies(self) -> int:
        return self.total.multiplies

    @property
    def adds(self) -> int:
        return self.total.adds

    @property
    def global_read_bytes_analytic(self) -> int:
        return self.total.global_read_bytes_analytic

    @property
    def global_write_bytes_analytic(self) -> int:
        return self.total.global_write_bytes_analytic


@dataclass(frozen=True, eq=False)
class AlgoResult:
    output: Tensor
    counts: AlgoCounts

from __future__ import annotations

from dataclasses import dataclass, field

from .trace import BufferTraffic

CSV_COLUMNS = (
    "kernel",
    "global_read_raw",
    "global_read_post_l2",
    "global_write",
    "shared_per_wg",
    "bank_extra_cycles",
    "barriers",
    "vector_inst",
    "scalar_inst",
    "max_live_regs",
    "cycles",
    "alu_busy",
    "mem_busy",
)


@dataclass(frozen=True)
class SimMetrics:
    """Simulated profile of one kernel launch (or several, see `combine`).

    Instruction counts are warp instructions over the whole launch. Busy fractions
    are busy cycles over total cycles on one compute unit.
    """

    kernel: str
    global_read_bytes_raw: int
    global_read_bytes_post_l2: int
    global_write_bytes: int
    shared_bytes_per_wg: int
    bank_conflict_extra_cycles: int
    barrier_count: int
    vector_inst: int
    scalar_inst: int
    max_live_regs: int
    cycles: int
    alu_busy_fraction: float
    mem_unit_busy_fraction: float
    workgroups: int = 0
    waves: int = 0
    occupancy: int = 0
    wavefronts: int = 0
    transactions: int = 0
    traffic_by_buffer: dict[str, BufferTraffic] = field(default_factory=dict)

    def csv_row(self) -> list[str]:
        return [
            self.kernel,
            str(self.global_read_bytes_raw),
            str(self.global_read_bytes_post_l2),
            str(self.global_write_bytes),
            str(self.shared_bytes_per_wg),
            str(self.bank_conflict_extra_cycles),
            str(self.barrier_count),
            str(self.vector_inst),
            str(self.scalar_inst),
            str(self.max_live_regs),
            str(self.cycles),
            f"{self.alu_busy_fraction:.4f}",
            f"{self.mem_unit_busy_fraction:.4f}",
        ]

    @classmethod
    def combine(cls, parts: list[SimMetrics], name: str | None = None) -> SimMetrics:
        """Kernels launched back to back: counts and cycles add, per-workgroup
        resources take the maximum, busy fractions are cycle-weighted."""
        if not parts:
            raise ValueError("nothing to combine")
        if len(parts) == 1 and name is None:
            return parts[0]
        cycles = sum(p.cycles for p in parts)

        def weighted(attr: str) -> float:
            if not cycles:
                return 0.0
            return sum(getattr(p, attr) * p.cycles for p in parts) / cycles

        by_buffer: dict[str, BufferTraffic] = {}
        for p in parts:
            for buf, t in p.traffic_by_buffer.items():
                acc = by_buffer.setdefault(buf, BufferTraffic())
                acc.read_raw += t.read_raw
                acc.read_post_l2 += t.read_post_l2
                acc.write += t.write
        return cls(
            kernel=name or "+".join(p.kernel for p in parts),
            global_read_bytes_raw=sum(p.global_read_bytes_raw for p in parts),
            global_read_bytes_post_l2=sum(p.global_read_bytes_post_l2 for p in parts),
            global_write_bytes=sum(p.global_write_bytes for p in parts),
            shared_bytes_per_wg=max(p.shared_bytes_per_wg for p in parts),
            bank_conflict_extra_cycles=sum(p.bank_conflict_extra_cycles for p in parts),
            barrier_count=sum(p.barrier_count for p in parts),
            vector_inst=sum(p.vector_inst for p in parts),
            scalar_inst=sum(p.scalar_inst for p in parts),
            max_live_regs=max(p.max_live_regs for p in parts),
            cycles=cycles,
            alu_busy_fraction=weighted("alu_busy_fraction"),
            mem_unit_busy_fraction=weighted("mem_unit_busy_fraction"),
            workgroups=sum(p.workgroups for p in parts),
            waves=sum(p.waves for p in parts),
            occupancy=min(p.occupancy for p in parts),
            wavefronts=sum(p.wavefronts for p in parts),
            transactions=sum(p.transactions for p in parts),
            traffic_by_buffer=by_buffer,
        )

"""Kernel launch simulation: resource checks, occupancy, traffic trace and timing."""

from __future__ import annotations

import logging
import math

from ..errors import LaunchError
from ..ir.analysis import barrier_census, register_pressure, uniform_counts
from ..ir.program import KernelProgram, Pipeline
from .machine import MachineConfig
from .metrics import SimMetrics
from .scheduler import ComputeUnit, TimingResult
from .trace import BufferTraffic, trace

logger = logging.getLogger(__name__)


def occupancy(p: KernelProgram, m: MachineConfig, max_live: int) -> int:
    """Workgroups of `p` that fit on one compute unit at once."""
    warps = -(-p.threads_per_workgroup // m.warp_size)
    if p.threads_per_workgroup > m.max_workgroup:
        raise LaunchError(f"{p.name}: {p.threads_per_workgroup} threads per workgroup, machine allows {m.max_workgroup}")
    if warps > m.max_warps_per_cu:
        raise LaunchError(f"{p.name}: {warps} warps per workgroup, a compute unit holds {m.max_warps_per_cu}")
    if p.shared_bytes > m.shared_per_cu:
        raise LaunchError(f"{p.name}: {p.shared_bytes} B shared memory per workgroup, a compute unit has {m.shared_per_cu}")
    regs = max(max_live, 1) * m.warp_size * warps
    if regs > m.regfile_per_cu:
        raise LaunchError(f"{p.name}: {regs} registers per workgroup, a compute unit has {m.regfile_per_cu}")
    limits = [
        m.max_warps_per_cu // warps,
        m.regfile_per_cu // regs,
        m.max_workgroups_per_cu,
    ]
    if p.shared_bytes:
        limits.append(m.shared_per_cu // p.shared_bytes)
    return min(limits)


def simulate(p: KernelProgram, m: MachineConfig, resident_images: int = 1, pipeline_depth: int = 1) -> SimMetrics:
    """Simulated metrics of one launch of `p` over `resident_images` images at once.

    Every workgroup is traced for traffic. One compute unit's workgroups are
    split as evenly as possible into the fewest waves its occupancy allows,
    and each wave size present is timed once. Cycles never fall below the
    issue, ALU and bandwidth bounds of the whole launch.
    """
    if resident_images < 1:
        raise LaunchError(f"{p.name}: resident_images must be at least 1")
    report = register_pressure(p, pipeline_depth)
    occ = occupancy(p, m, report.max_live)
    warps_per_wg = -(-p.threads_per_workgroup // m.warp_size)
    n_wg = p.workgroups * resident_images
    per_cu = -(-n_wg // m.num_cus)
    resident = max(1, min(occ, per_cu))

    traced = trace(p, m, resident)
    scale = resident_images
    bandwidth = m.global_bytes_per_cycle / min(m.num_cus, n_wg)
    n_regs = 1 + max((r for i in traced.costs.steps for r in (*i.srcs, i.dst if i.dst is not None else -1)), default=0)

    def timed(workgroups: int) -> TimingResult:
        cu = ComputeUnit(traced.costs, workgroups, m, n_regs, bandwidth, traced.dram_fraction, pipeline_depth)
        return cu.run()

    # resident sets are balanced over the fewest waves that hold them
    waves = -(-per_cu // resident)
    size, big = divmod(per_cu, waves)
    small = timed(size)
    large = timed(size + 1) if big else small
    timed_cycles = big * large.cycles + (waves - big) * small.cycles

    vector, scalar = uniform_counts(p)
    wavefronts = warps_per_wg * n_wg
    vector_inst = vector * wavefronts
    scalar_inst = scalar * wavefronts
    issue_bound = (vector_inst + scalar_inst) / m.issue_slots
    alu_bound = vector_inst * m.alu_warp_cycles / m.num_cus
    bandwidth_bound = (traced.read_post_l2 + traced.write) * scale / m.global_bytes_per_cycle
    cycles = math.ceil(max(timed_cycles, issue_bound, alu_bound, bandwidth_bound))

    alu_busy = big * large.alu_busy_cycles + (waves - big) * small.alu_busy_cycles
    mem_busy = big * large.mem_busy_cycles + (waves - big) * small.mem_busy_cycles
    by_buffer = {
        name: BufferTraffic(t.read_raw * scale, t.read_post_l2 * scale, t.write * scale)
        for name, t in sorted(traced.by_buffer.items())
    }
    metrics = SimMetrics(
        kernel=p.name,
        global_read_bytes_raw=traced.read_raw * scale,
        global_read_bytes_post_l2=traced.read_post_l2 * scale,
        global_write_bytes=traced.write * scale,
        shared_bytes_per_wg=p.shared_bytes,
        bank_conflict_extra_cycles=traced.bank_extra * scale,
        barrier_count=barrier_census(p),
        vector_inst=vector_inst,
        scalar_inst=scalar_inst,
        max_live_regs=report.max_live,
        cycles=cycles,
        alu_busy_fraction=min(1.0, alu_busy / cycles) if cycles else 0.0,
        mem_unit_busy_fraction=min(1.0, mem_busy / cycles) if cycles else 0.0,
        workgroups=n_wg,
        waves=waves,
        occupancy=occ,
        wavefronts=wavefronts,
        transactions=traced.transactions * scale,
        traffic_by_buffer=by_buffer,
    )
    logger.debug(
        "simulated %s on %s: %d cycles, %d waves of %d workgroups, occupancy %d, %d live regs",
        p.name, m.name, cycles, metrics.waves, resident, occ, report.max_live,
    )
    return metrics


def simulate_pipeline(pipeline: Pipeline, m: MachineConfig, resident_images: int = 1,
                      pipeline_depth: int = 1, name: str | None = None) -> SimMetrics:
    parts = [simulate(k, m, resident_images, pipeline_depth) for k in pipeline]
    return SimMetrics.combine(parts, name)

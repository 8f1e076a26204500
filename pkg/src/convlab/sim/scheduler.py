from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import IntEnum

from ..ir.program import Op
from .machine import MachineConfig
from .trace import WarpCosts

logger = logging.getLogger(__name__)


class Unit(IntEnum):
    VALU = 0
    SALU = 1
    SHARED = 2
    LOAD = 3
    STORE = 4
    BARRIER = 5


@dataclass(frozen=True)
class TimingResult:
    cycles: int
    alu_busy_cycles: float
    mem_busy_cycles: float
    issued: int


def _unit(op: Op, uniform: bool) -> Unit:
    if op is Op.BARRIER:
        return Unit.BARRIER
    if op is Op.LD_GLOBAL:
        return Unit.LOAD
    if op is Op.ST_GLOBAL:
        return Unit.STORE
    if op.is_shared:
        return Unit.SHARED
    return Unit.SALU if uniform else Unit.VALU


class ComputeUnit:
    """Cycle model of the warps resident on one compute unit.

    Each warp issues in order and stalls on use: an instruction waits until its
    operands (and any pending write to its destination) are ready and its unit
    is free. Schedulers pick round-robin among warps that can issue. With
    pipeline_depth d a stalled warp may issue up to d-1 later global loads of the
    current barrier region early.
    """

    def __init__(self, costs: WarpCosts, workgroups: int, m: MachineConfig, n_regs: int,
                 bandwidth: float, dram_fraction: float, pipeline_depth: int = 1) -> None:
        self.m = m
        steps = costs.steps
        self.n = len(steps)
        self.unit = [_unit(s.op, s.uniform) for s in steps]
        self.dst = [-1 if s.dst is None else s.dst for s in steps]
        self.srcs = [s.srcs for s in steps]
        self.wpg = costs.warps_per_wg
        recorded = costs.warps // self.wpg
        self.n_warps = workgroups * self.wpg
        # more workgroups than were traced reuse the traced ones' costs
        cols = [(w // self.wpg % recorded) * self.wpg + w % self.wpg for w in range(self.n_warps)]
        self.transactions = [costs.transactions[:, c].tolist() for c in cols]
        self.dram = [costs.dram_bytes[:, c].tolist() for c in cols]
        self.extra = [costs.shared_extra[:, c].tolist() for c in cols]
        self.n_regs = n_regs
        self.bandwidth = bandwidth
        self.dram_fraction = dram_fraction
        self.depth = pipeline_depth
        self._lookahead()

    def _lookahead(self) -> None:
        self.next_load = [-1] * self.n
        nxt = -1
        for i in range(self.n - 1, -1, -1):
            self.next_load[i] = nxt
            if self.unit[i] is Unit.BARRIER:
                nxt = -1
            elif self.unit[i] is Unit.LOAD:
                nxt = i
        self.src_def = [-1] * self.n
        last: dict[int, int] = {}
        for i in range(self.n):
            self.src_def[i] = max((last.get(s, -1) for s in self.srcs[i]), default=-1)
            if self.dst[i] >= 0:
                last[self.dst[i]] = i

    def run(self) -> TimingResult:
        m = self.m
        n, nw = self.n, self.n_warps
        if n == 0 or nw == 0:
            return TimingResult(0, 0.0, 0.0, 0)
        pc = [0] * nw
        wake = [0.0] * nw
        ready = [[0.0] * self.n_regs for _ in range(nw)]
        early: list[dict[int, float]] = [{} for _ in range(nw)]
        blocked = [False] * nw
        done = [False] * nw
        arrived = [0] * (nw // self.wpg)
        sched = [[w for w in range(nw) if w % m.schedulers_per_cu == s] for s in range(m.schedulers_per_cu)]
        rr = [0] * len(sched)
        self.alu_next = self.shared_next = self.mem_next = self.dram_next = 0.0
        self.alu_busy = self.mem_busy = 0.0
        self.last_done = 0.0
        issued = 0
        remaining = nw
        cycle = 0.0
        while remaining:
            any_issued = False
            for s, warps in enumerate(sched):
                slots = m.issue_width
                count = len(warps)
                for k in range(count):
                    if not slots:
                        break
                    w = warps[(rr[s] + k) % count]
                    if done[w] or blocked[w] or wake[w] > cycle:
                        continue
                    i = pc[w]
                    pending = early[w]
                    while i < n and i in pending:
                        ready[w][self.dst[i]] = pending.pop(i)
                        i += 1
                    pc[w] = i
                    if i == n:
                        done[w] = True
                        remaining -= 1
                        continue
                    if self.unit[i] is Unit.BARRIER:
                        pc[w] = i + 1
                        g = w // self.wpg
                        arrived[g] += 1
                        blocked[w] = True
                        if arrived[g] == self.wpg:
                            arrived[g] = 0
                            for v in range(g * self.wpg, (g + 1) * self.wpg):
                                blocked[v] = False
                                wake[v] = cycle + 1
                        slots -= 1
                        issued += 1
                        any_issued = True
                        rr[s] = (rr[s] + k + 1) % count
                        continue
                    t = self._earliest(w, i, ready[w])
                    if t <= cycle:
                        self._issue(w, i, cycle, ready[w])
                        pc[w] = i + 1
                    elif self.depth > 1 and self._early_load(w, i, cycle, ready[w], early[w]):
                        wake[w] = cycle + 1
                    else:
                        wake[w] = t
                        continue
                    slots -= 1
                    issued += 1
                    any_issued = True
                    rr[s] = (rr[s] + k + 1) % count
            if not remaining:
                break
            if any_issued:
                cycle += 1
            else:
                waiting = [wake[w] for w in range(nw) if not done[w] and not blocked[w]]
                if not waiting:
                    raise RuntimeError("all warps blocked at a barrier")
                cycle = max(cycle + 1, math.ceil(min(waiting)))
        end = max(cycle, self.last_done, self.dram_next)
        logger.debug("%d warps: %d instructions in %.0f cycles", nw, issued, end)
        return TimingResult(int(math.ceil(end)), self.alu_busy, self.mem_busy, issued)

    def _earliest(self, w: int, i: int, regs: list[float]) -> float:
        t = max((regs[s] for s in self.srcs[i]), default=0.0)
        d = self.dst[i]
        if d >= 0:
            t = max(t, regs[d])
        unit = self.unit[i]
        if unit is Unit.VALU:
            t = max(t, self.alu_next)
        elif unit is Unit.SHARED:
            t = max(t, self.shared_next)
        elif unit is Unit.LOAD or unit is Unit.STORE:
            t = max(t, self.mem_next)
        return t

    def _issue(self, w: int, i: int, cycle: float, regs: list[float]) -> float:
        m, unit, d = self.m, self.unit[i], self.dst[i]
        if unit is Unit.VALU or unit is Unit.SALU:
            if unit is Unit.VALU:
                self.alu_next = max(self.alu_next, cycle) + m.alu_warp_cycles
                self.alu_busy += m.alu_warp_cycles
            done = cycle + m.lat_alu
        elif unit is Unit.SHARED:
            occupancy = 1 + self.extra[w][i]
            self.shared_next = max(self.shared_next, cycle) + occupancy
            done = cycle + m.lat_shared + self.extra[w][i]
        else:
            transactions = max(self.transactions[w][i], 1)
            self.mem_next = max(self.mem_next, cycle) + transactions
            self.mem_busy += transactions
            moved = self.dram[w][i] * (self.dram_fraction if unit is Unit.LOAD else 1.0)
            self.dram_next = max(self.dram_next, cycle) + moved / self.bandwidth
            done = self.dram_next + m.lat_global if unit is Unit.LOAD else cycle + 1
        if d >= 0:
            regs[d] = done
        self.last_done = max(self.last_done, done)
        return done

    def _early_load(self, w: int, i: int, cycle: float, regs: list[float], pending: dict[int, float]) -> bool:
        if len(pending) >= self.depth - 1 or self.mem_next > cycle:
            return False
        j = self.next_load[i]
        while j != -1 and j in pending:
            j = self.next_load[j]
        if j == -1 or self.src_def[j] >= i:
            return False
        if any(regs[s] > cycle for s in self.srcs[j]):
            return False
        # renamed destination: the value lands in the register when pc reaches j
        saved, self.dst[j] = self.dst[j], -1
        try:
            done = self._issue(w, j, cycle, regs)
        finally:
            self.dst[j] = saved
        pending[j] = done
        return True

"""Memory trace of a whole kernel launch.

Workgroups are dispatched round-robin to compute units in rounds of
num_cus * resident; within a round they advance one instruction at a time in
lockstep, which fixes the order the L2 sees their requests. The warps that land
on compute unit 0 in the first round also get per-step costs recorded for the
timing model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..ir.program import Buffer, Instr, KernelProgram, Loop, Node, Op
from .machine import MachineConfig
from .memory import LRUCache, warp_conflicts, warp_segments

logger = logging.getLogger(__name__)

# buffers live in disjoint, aligned address ranges
BUFFER_BASE = {b: i << 32 for i, b in enumerate(Buffer)}


@dataclass
class BufferTraffic:
    read_raw: int = 0
    read_post_l2: int = 0
    write: int = 0


@dataclass
class WarpCosts:
    """Dynamic instruction sequence and per-step, per-warp costs for one compute unit."""

    steps: list[Instr]
    transactions: np.ndarray
    dram_bytes: np.ndarray
    shared_extra: np.ndarray
    warps_per_wg: int

    @property
    def warps(self) -> int:
        return self.transactions.shape[1]


@dataclass
class TraceResult:
    read_raw: int = 0
    read_post_l2: int = 0
    write: int = 0
    bank_extra: int = 0
    transactions: int = 0
    by_buffer: dict[str, BufferTraffic] = field(default_factory=dict)
    costs: WarpCosts | None = None

    @property
    def dram_fraction(self) -> float:
        return self.read_post_l2 / self.read_raw if self.read_raw else 1.0


class _RoundWalker:
    def __init__(self, program: KernelProgram, m: MachineConfig, wg_ids: np.ndarray,
                 cache: LRUCache, result: TraceResult, record_rows: np.ndarray | None) -> None:
        self.program, self.m, self.cache, self.result = program, m, cache, result
        gx, gy, _ = program.grid_dims
        wx, _ = program.workgroup_dims
        ws = m.warp_size
        self.warps = -(-program.threads_per_workgroup // ws)
        n = wg_ids.size
        self.shape = (n, self.warps, ws)
        wg = wg_ids.reshape(n, 1, 1)
        t = np.arange(self.warps * ws).reshape(1, self.warps, ws)
        self.valid = np.broadcast_to(t < program.threads_per_workgroup, self.shape)
        self.env: dict[str, int | np.ndarray] = {
            "gid_x": wg % gx,
            "gid_y": (wg // gx) % gy,
            "gid_z": wg // (gx * gy),
            "tid_x": t % wx,
            "tid_y": t // wx,
        }
        self.record_rows = record_rows
        self.steps: list[Instr] = []
        self.costs: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self.conflict_cache: dict[int, np.ndarray] = {}

    def walk(self, body: tuple[Node, ...]) -> None:
        for node in body:
            if isinstance(node, Loop):
                for it in range(node.count):
                    self.env[node.var] = it
                    self.walk(node.body)
                self.env.pop(node.var, None)
                continue
            if self.record_rows is not None:
                self.steps.append(node)
            if node.op.is_global:
                self._global(node)
            elif node.op.is_shared:
                self._shared(node)

    def _mask(self, instr: Instr) -> np.ndarray:
        if instr.guard is None:
            return self.valid
        return self.valid & np.broadcast_to(instr.guard.evaluate(self.env), self.shape)

    def _addr(self, instr: Instr) -> np.ndarray:
        return np.broadcast_to(np.asarray(instr.addr.evaluate(self.env), dtype=np.int64), self.shape)

    def _record(self, transactions: np.ndarray, dram: np.ndarray, extra: np.ndarray) -> None:
        if self.record_rows is None:
            return
        rows = self.record_rows
        self.costs[len(self.steps) - 1] = (
            transactions[rows].reshape(-1),
            dram[rows].reshape(-1),
            extra[rows].reshape(-1),
        )

    def _global(self, instr: Instr) -> None:
        m, res = self.m, self.result
        mask = self._mask(instr)
        addr = self._addr(instr) + BUFFER_BASE[instr.buffer]
        segments = warp_segments(addr, mask, m.segment_bytes)
        res.transactions += int(segments.sum())
        traffic = res.by_buffer.setdefault(instr.buffer.value, BufferTraffic())
        zeros = np.zeros(self.shape[:2], dtype=np.int64)
        if instr.op is Op.ST_GLOBAL:
            written = mask.sum(axis=-1) * 4
            res.write += int(written.sum())
            traffic.write += int(written.sum())
            self._record(segments, written, zeros)
            return
        lines = np.sort(np.where(mask, addr // m.l2_line_bytes, np.iinfo(np.int64).max), axis=-1)
        first = np.ones_like(lines, dtype=bool)
        first[..., 1:] = lines[..., 1:] != lines[..., :-1]
        first &= lines != np.iinfo(np.int64).max
        per_warp = first.sum(axis=-1)
        raw = int(per_warp.sum()) * m.l2_line_bytes
        misses = sum(1 for line in lines[first].tolist() if not self.cache.access(line))
        post = misses * m.l2_line_bytes
        res.read_raw += raw
        res.read_post_l2 += post
        traffic.read_raw += raw
        traffic.read_post_l2 += post
        self._record(segments, per_warp * m.l2_line_bytes, zeros)

    def _shared(self, instr: Instr) -> None:
        m = self.m
        if instr.guard is None and id(instr) in self.conflict_cache:
            extra = self.conflict_cache[id(instr)]
        else:
            mask = self._mask(instr)
            extra = warp_conflicts(self._addr(instr), mask, m.banks)
            if instr.guard is None:
                # workgroup and loop terms shift all lanes of a warp alike; the degree is fixed
                self.conflict_cache[id(instr)] = extra[0]
        extra = np.broadcast_to(extra, self.shape[:2])
        self.result.bank_extra += int(extra.sum())
        zeros = np.zeros(self.shape[:2], dtype=np.int64)
        self._record(zeros, zeros, extra)


def trace(program: KernelProgram, m: MachineConfig, resident: int) -> TraceResult:
    """Traffic, L2 filtering and bank conflicts over every workgroup of `program`."""
    result = TraceResult()
    cache = LRUCache(m.l2_lines, m.l2_line_bytes)
    n_wg = program.workgroups
    per_round = m.num_cus * resident
    conflict_cache: dict[int, np.ndarray] = {}
    for start in range(0, n_wg, per_round):
        wg_ids = np.arange(start, min(start + per_round, n_wg))
        record = None
        if start == 0:
            record = np.arange(0, wg_ids.size, m.num_cus)[:resident]
        walker = _RoundWalker(program, m, wg_ids, cache, result, record)
        walker.conflict_cache = conflict_cache
        walker.walk(program.body)
        if record is not None:
            result.costs = _costs(walker, record.size)
    logger.debug(
        "traced %s: raw=%d post_l2=%d write=%d bank_extra=%d",
        program.name, result.read_raw, result.read_post_l2, result.write, result.bank_extra,
    )
    return result


def _costs(walker: _RoundWalker, n_wg: int) -> WarpCosts:
    n_steps, n_warps = len(walker.steps), n_wg * walker.warps
    transactions = np.zeros((n_steps, n_warps), dtype=np.int64)
    dram = np.zeros((n_steps, n_warps), dtype=np.int64)
    extra = np.zeros((n_steps, n_warps), dtype=np.int64)
    for step, (t, d, e) in walker.costs.items():
        transactions[step], dram[step], extra[step] = t, d, e
    return WarpCosts(walker.steps, transactions, dram, extra, walker.warps)

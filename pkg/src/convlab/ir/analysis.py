"""Static analyses over kernel programs: dynamic counts, barriers, load pipelining, liveness."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .builder import KernelBuilder
from .program import Affine, Buffer, Instr, KernelProgram, Loop, Node, Op, RegKind


def _count(body: tuple[Node, ...], trips: int, acc: Counter) -> None:
    for node in body:
        if isinstance(node, Loop):
            _count(node.body, trips * node.count, acc)
        else:
            acc[node.op] += trips


def dynamic_counts(program: KernelProgram) -> Counter[Op]:
    """Instructions one thread executes, by opcode; guards do not change issue counts."""
    acc: Counter[Op] = Counter()
    _count(program.body, 1, acc)
    return acc


def barrier_census(program: KernelProgram) -> int:
    """Barrier executions per workgroup."""
    return dynamic_counts(program)[Op.BARRIER]


def uniform_counts(program: KernelProgram) -> tuple[int, int]:
    """(vector, scalar) instructions one thread executes; uniform ones issue once per warp as scalar."""
    vector = scalar = 0

    def walk(body: tuple[Node, ...], trips: int) -> None:
        nonlocal vector, scalar
        for node in body:
            if isinstance(node, Loop):
                walk(node.body, trips * node.count)
            elif node.op is Op.BARRIER:
                continue
            elif node.uniform:
                scalar += trips
            else:
                vector += trips

    walk(program.body, 1)
    return vector, scalar


# ---- software pipelining ----


def _hoistable(remaining: list[Instr], j: int) -> bool:
    load = remaining[j]
    earlier = remaining[:j]
    defined = {i.dst for i in earlier if i.dst is not None}
    if any(src in defined for src in load.srcs):
        return False
    # a reused destination stays behind earlier reads and writes of it
    if any(load.dst in i.srcs or i.dst == load.dst for i in earlier):
        return False
    return not any(i.op is Op.ST_GLOBAL and i.buffer is load.buffer for i in earlier)


def _schedule(block: list[Instr], depth: int) -> list[Instr]:
    remaining = list(block)
    out: list[Instr] = []
    outstanding: set[int] = set()
    while remaining:
        while len(outstanding) < depth:
            j = next((j for j, i in enumerate(remaining) if i.op is Op.LD_GLOBAL), None)
            if j is None or not _hoistable(remaining, j):
                break
            load = remaining.pop(j)
            out.append(load)
            outstanding.add(load.dst)
        if not remaining:
            break
        instr = remaining.pop(0)
        out.append(instr)
        outstanding.difference_update(instr.srcs)
        if instr.op is Op.LD_GLOBAL:
            outstanding.add(instr.dst)
    return out


def _pipeline_body(body: tuple[Node, ...], depth: int) -> tuple[Node, ...]:
    out: list[Node] = []
    block: list[Instr] = []
    for node in body:
        if isinstance(node, Loop):
            out += _schedule(block, depth)
            block = []
            out.append(Loop(node.var, node.count, _pipeline_body(node.body, depth)))
        elif node.op is Op.BARRIER:
            out += _schedule(block, depth)
            block = []
            out.append(node)
        else:
            block.append(node)
    out += _schedule(block, depth)
    return tuple(out)


def pipeline_loads(program: KernelProgram, depth: int) -> KernelProgram:
    """Hoist global loads so up to `depth` are in flight before their first use.

    Reordering stays inside straight-line blocks; barriers and loop boundaries
    are never crossed. Depth 1 keeps program order.
    """
    if depth < 1:
        raise ConfigError(f"pipeline depth must be >= 1, got {depth}")
    return program.with_body(_pipeline_body(program.body, depth))


# ---- register pressure ----


@dataclass(frozen=True)
class RegisterReport:
    max_live: int
    per_loop_breakdown: dict[str, int] = field(default_factory=dict)
    by_kind: dict[RegKind, int] = field(default_factory=dict)
    accumulators: int = 0
    pipeline_depth: int = 1

    def live(self, kind: RegKind) -> int:
        return self.by_kind.get(kind, 0)


@dataclass
class _Span:
    label: str
    start: int
    end: int = 0
    used: set[int] = field(default_factory=set)
    defined: set[int] = field(default_factory=set)


def _linearize(body: tuple[Node, ...], defs: dict[int, int], uses: dict[int, int],
               spans: list[_Span], open_spans: list[_Span], pos: int) -> int:
    for node in body:
        if isinstance(node, Loop):
            span = _Span(f"{node.var}@{pos}", pos)
            spans.append(span)
            open_spans.append(span)
            pos = _linearize(node.body, defs, uses, spans, open_spans, pos)
            open_spans.pop()
            span.end = pos - 1
            continue
        for src in node.srcs:
            uses[src] = pos
            for s in open_spans:
                s.used.add(src)
        if node.dst is not None:
            defs.setdefault(node.dst, pos)
            for s in open_spans:
                s.defined.add(node.dst)
        pos += 1
    return pos


def register_pressure(program: KernelProgram, pipeline_depth: int = 1) -> RegisterReport:
    """Live-range analysis of the load-pipelined schedule.

    A register is live from its first definition through its last use. Values
    used inside a loop but defined before it stay live to the loop's end;
    accumulators are live for the whole kernel.
    """
    scheduled = pipeline_loads(program, pipeline_depth)
    defs: dict[int, int] = {}
    uses: dict[int, int] = {}
    spans: list[_Span] = []
    n = _linearize(scheduled.body, defs, uses, spans, [], 0)
    if n == 0:
        return RegisterReport(0, accumulators=len(program.accumulators), pipeline_depth=pipeline_depth)
    accumulators = set(program.accumulators)
    intervals: dict[int, tuple[int, int]] = {}
    for reg in set(defs) | set(uses):
        if reg in accumulators:
            intervals[reg] = (0, n - 1)
            continue
        lo = defs.get(reg, uses.get(reg, 0))
        hi = max(uses.get(reg, lo), lo)
        for span in spans:
            if reg in span.used and reg not in span.defined and lo < span.start:
                hi = max(hi, span.end)
        intervals[reg] = (lo, hi)
    for reg in accumulators - intervals.keys():
        intervals[reg] = (0, n - 1)

    total = np.zeros(n + 1, dtype=np.int64)
    per_kind: dict[RegKind, np.ndarray] = {}
    for reg, (lo, hi) in intervals.items():
        total[lo] += 1
        total[hi + 1] -= 1
        kind = program.reg_kinds.get(reg, RegKind.TEMP)
        arr = per_kind.setdefault(kind, np.zeros(n + 1, dtype=np.int64))
        arr[lo] += 1
        arr[hi + 1] -= 1
    live = np.cumsum(total)[:n]
    by_kind = {kind: int(np.cumsum(arr)[:n].max()) for kind, arr in per_kind.items()}
    per_loop = {s.label: int(live[s.start : s.end + 1].max()) for s in spans if s.end >= s.start}
    return RegisterReport(
        max_live=int(live.max()),
        per_loop_breakdown=per_loop,
        by_kind=by_kind,
        accumulators=len(accumulators),
        pipeline_depth=pipeline_depth,
    )


# ---- micro programs ----


def load_add_chain(n: int = 4) -> KernelProgram:
    """Loop of `load x; acc += x`: each add waits on the load just issued."""
    b = KernelBuilder("load_add_chain")
    acc = b.accumulator()
    with b.loop("i", n):
        x = b.ld_global(Buffer.INPUT, Affine.of(0, i=4), RegKind.IMAGE)
        b.accumulate(acc, x)
    b.st_global(Buffer.OUTPUT, Affine.of(0), acc)
    return b.build((1, 1), (1, 1, 1))


def load_add_batch(n: int = 4) -> KernelProgram:
    """`n` independent loads issued back to back, then reduced by n-1 adds."""
    b = KernelBuilder("load_add_batch")
    xs = [b.ld_global(Buffer.INPUT, Affine.of(4 * i), RegKind.IMAGE) for i in range(n)]
    total = xs[0]
    for x in xs[1:]:
        total = b.add(total, x)
    b.st_global(Buffer.OUTPUT, Affine.of(0), total)
    return b.build((1, 1), (1, 1, 1))

"""Kernel program data model: per-thread instruction streams over affine addresses."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class Op(str, Enum):
    LD_GLOBAL = "LD_GLOBAL"
    ST_GLOBAL = "ST_GLOBAL"
    LD_SHARED = "LD_SHARED"
    ST_SHARED = "ST_SHARED"
    FMA = "FMA"
    MUL = "MUL"
    ADD = "ADD"
    SUB = "SUB"
    IALU = "IALU"
    BARRIER = "BARRIER"
    LOOP = "LOOP"

    @property
    def is_global(self) -> bool:
        return self in (Op.LD_GLOBAL, Op.ST_GLOBAL)

    @property
    def is_shared(self) -> bool:
        return self in (Op.LD_SHARED, Op.ST_SHARED)

    @property
    def is_load(self) -> bool:
        return self in (Op.LD_GLOBAL, Op.LD_SHARED)

    @property
    def is_store(self) -> bool:
        return self in (Op.ST_GLOBAL, Op.ST_SHARED)


class Buffer(str, Enum):
    INPUT = "input"
    FILTER = "filter"
    OUTPUT = "output"
    COL = "col"
    V = "V"
    U = "U"
    M = "M"
    SHARED = "shared"


class RegKind(str, Enum):
    ACC = "acc"
    FILTER = "filter"
    IMAGE = "image"
    ADDR = "addr"
    TEMP = "temp"


THREAD_VARS = ("tid_x", "tid_y")
GROUP_VARS = ("gid_x", "gid_y", "gid_z")


@dataclass(frozen=True)
class Affine:
    """const + sum(coef * var) over thread ids, workgroup ids and loop variables, in bytes."""

    const: int = 0
    terms: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, const: int = 0, **coeffs: int) -> Affine:
        return cls(int(const), tuple(sorted((k, int(v)) for k, v in coeffs.items() if v)))

    def coeff(self, var: str) -> int:
        for name, value in self.terms:
            if name == var:
                return value
        return 0

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.terms)

    def depends_on_thread(self) -> bool:
        return any(name in THREAD_VARS for name, _ in self.terms)

    def __add__(self, other: Affine | int) -> Affine:
        if isinstance(other, int):
            return Affine(self.const + other, self.terms)
        merged = dict(self.terms)
        for name, value in other.terms:
            merged[name] = merged.get(name, 0) + value
        return Affine.of(self.const + other.const, **merged)

    __radd__ = __add__

    def __mul__(self, k: int) -> Affine:
        return Affine.of(self.const * k, **{name: value * k for name, value in self.terms})

    __rmul__ = __mul__

    def evaluate(self, env: Mapping[str, int | np.ndarray]) -> int | np.ndarray:
        value: int | np.ndarray = self.const
        for name, coef in self.terms:
            value = value + coef * env[name]
        return value

    def text(self) -> str:
        parts = [str(self.const)] if self.const or not self.terms else []
        parts += [f"{coef}*{name}" for name, coef in self.terms]
        return " + ".join(parts)


@dataclass(frozen=True)
class Bound:
    """lo <= expr < hi."""

    expr: Affine
    lo: int
    hi: int

    def evaluate(self, env: Mapping[str, int | np.ndarray]) -> np.ndarray:
        v = self.expr.evaluate(env)
        return (v >= self.lo) & (v < self.hi)


@dataclass(frozen=True)
class Guard:
    bounds: tuple[Bound, ...] = ()

    def evaluate(self, env: Mapping[str, int | np.ndarray]) -> np.ndarray | bool:
        mask: np.ndarray | bool = True
        for bound in self.bounds:
            mask = mask & bound.evaluate(env)
        return mask

    def __and__(self, other: Guard | None) -> Guard:
        if other is None:
            return self
        return Guard(self.bounds + other.bounds)

    def depends_on_thread(self) -> bool:
        return any(b.expr.depends_on_thread() for b in self.bounds)

    def text(self) -> str:
        return " && ".join(f"{b.lo} <= {b.expr.text()} < {b.hi}" for b in self.bounds)


def bound(expr: Affine, lo: int, hi: int) -> Guard:
    return Guard((Bound(expr, lo, hi),))


@dataclass(frozen=True)
class Instr:
    op: Op
    dst: int | None = None
    srcs: tuple[int, ...] = ()
    addr: Affine | None = None
    buffer: Buffer | None = None
    guard: Guard | None = None
    uniform: bool = False


@dataclass(frozen=True)
class Loop:
    var: str
    count: int
    body: tuple[Node, ...]

    op = Op.LOOP


Node = Instr | Loop


@dataclass(frozen=True, eq=False)
class KernelProgram:
    name: str
    workgroup_dims: tuple[int, int]
    grid_dims: tuple[int, int, int]
    shared_bytes: int
    body: tuple[Node, ...]
    accumulators: tuple[int, ...] = ()
    reg_kinds: Mapping[int, RegKind] = field(default_factory=dict)

    @property
    def threads_per_workgroup(self) -> int:
        return self.workgroup_dims[0] * self.workgroup_dims[1]

    @property
    def workgroups(self) -> int:
        gx, gy, gz = self.grid_dims
        return gx * gy * gz

    @property
    def threads(self) -> int:
        return self.workgroups * self.threads_per_workgroup

    def instructions(self) -> Iterator[Instr]:
        """Static instructions in program order, loop bodies included once."""
        yield from iter_instrs(self.body)

    def with_body(self, body: tuple[Node, ...]) -> KernelProgram:
        return replace(self, body=body)


def iter_instrs(body: tuple[Node, ...]) -> Iterator[Instr]:
    for node in body:
        if isinstance(node, Loop):
            yield from iter_instrs(node.body)
        else:
            yield node


def without_barrier(program: KernelProgram, index: int) -> KernelProgram:
    """Copy of `program` with its index-th static BARRIER (program order) removed."""
    seen = 0

    def strip(body: tuple[Node, ...]) -> tuple[Node, ...]:
        nonlocal seen
        out: list[Node] = []
        for node in body:
            if isinstance(node, Loop):
                out.append(Loop(node.var, node.count, strip(node.body)))
                continue
            if node.op is Op.BARRIER:
                seen += 1
                if seen - 1 == index:
                    continue
            out.append(node)
        return tuple(out)

    body = strip(program.body)
    if index < 0 or index >= seen:
        raise IndexError(f"{program.name} has {seen} static barriers, no index {index}")
    return program.with_body(body)


def static_barriers(program: KernelProgram) -> int:
    return sum(1 for i in program.instructions() if i.op is Op.BARRIER)


@dataclass(frozen=True, eq=False)
class Pipeline:
    """Kernels of one algorithm, launched in order; `filter_layout` names how FILTER is stored."""

    kernels: tuple[KernelProgram, ...]
    filter_layout: str = "KCRS"

    def __iter__(self) -> Iterator[KernelProgram]:
        return iter(self.kernels)

    def __len__(self) -> int:
        return len(self.kernels)

    def __getitem__(self, name: str) -> KernelProgram:
        for kernel in self.kernels:
            if kernel.name == name:
                return kernel
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(k.name for k in self.kernels)

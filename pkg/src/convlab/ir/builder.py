from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager

from .program import Affine, Buffer, Guard, Instr, KernelProgram, Loop, Node, Op, RegKind


class KernelBuilder:
    """Accumulates a kernel body; loops open with `with b.loop("c", n):`."""

    def __init__(self, name: str) -> None:
        self.name = name
        self._stack: list[list[Node]] = [[]]
        self._kinds: dict[int, RegKind] = {}
        self._uniform: set[int] = set()
        self._accumulators: list[int] = []
        self._loop_vars: list[str] = []

    def reg(self, kind: RegKind = RegKind.TEMP) -> int:
        rid = len(self._kinds)
        self._kinds[rid] = kind
        return rid

    def accumulator(self) -> int:
        rid = self.reg(RegKind.ACC)
        self._accumulators.append(rid)
        return rid

    def accumulators(self, n: int) -> list[int]:
        return [self.accumulator() for _ in range(n)]

    @contextmanager
    def loop(self, var: str, count: int) -> Iterator[None]:
        if var in self._loop_vars:
            raise ValueError(f"loop variable {var!r} already in scope")
        self._stack.append([])
        self._loop_vars.append(var)
        try:
            yield
        finally:
            self._loop_vars.pop()
            body = tuple(self._stack.pop())
        if count > 0 and body:
            self._stack[-1].append(Loop(var, count, body))

    def _emit(self, instr: Instr) -> None:
        self._stack[-1].append(instr)
        if instr.dst is not None and instr.uniform:
            self._uniform.add(instr.dst)

    def _mem_uniform(self, addr: Affine, guard: Guard | None) -> bool:
        return not addr.depends_on_thread() and not (guard and guard.depends_on_thread())

    def ialu(self, srcs: tuple[int, ...] = (), uniform: bool = False) -> int:
        dst = self.reg(RegKind.ADDR)
        self._emit(Instr(Op.IALU, dst, srcs, uniform=uniform))
        return dst

    def ld_global(self, buffer: Buffer, addr: Affine, kind: RegKind, guard: Guard | None = None,
                  base: int | None = None, into: int | None = None) -> int:
        """Load a word per thread; `into` reuses an existing register as the destination."""
        dst = self.reg(kind) if into is None else into
        srcs = () if base is None else (base,)
        self._emit(Instr(Op.LD_GLOBAL, dst, srcs, addr, buffer, guard, self._mem_uniform(addr, guard)))
        return dst

    def st_global(self, buffer: Buffer, addr: Affine, src: int, guard: Guard | None = None) -> None:
        self._emit(Instr(Op.ST_GLOBAL, None, (src,), addr, buffer, guard, False))

    def ld_shared(self, addr: Affine, kind: RegKind, guard: Guard | None = None) -> int:
        dst = self.reg(kind)
        self._emit(Instr(Op.LD_SHARED, dst, (), addr, Buffer.SHARED, guard, self._mem_uniform(addr, guard)))
        return dst

    def st_shared(self, addr: Affine, src: int, guard: Guard | None = None) -> None:
        self._emit(Instr(Op.ST_SHARED, None, (src,), addr, Buffer.SHARED, guard, False))

    def fma(self, acc: int, a: int, b: int) -> None:
        """acc += a * b."""
        self._emit(Instr(Op.FMA, acc, (a, b, acc)))

    def _alu(self, op: Op, a: int, b: int, kind: RegKind) -> int:
        dst = self.reg(kind)
        uniform = a in self._uniform and b in self._uniform
        self._emit(Instr(op, dst, (a, b), uniform=uniform))
        return dst

    def add(self, a: int, b: int, kind: RegKind = RegKind.TEMP) -> int:
        return self._alu(Op.ADD, a, b, kind)

    def sub(self, a: int, b: int, kind: RegKind = RegKind.TEMP) -> int:
        return self._alu(Op.SUB, a, b, kind)

    def mul(self, a: int, b: int, kind: RegKind = RegKind.TEMP) -> int:
        return self._alu(Op.MUL, a, b, kind)

    def accumulate(self, acc: int, value: int) -> None:
        """acc += value, keeping the accumulator's register."""
        self._emit(Instr(Op.ADD, acc, (acc, value)))

    def barrier(self) -> None:
        self._emit(Instr(Op.BARRIER))

    def build(self, workgroup_dims: tuple[int, int], grid_dims: tuple[int, int, int],
              shared_bytes: int = 0) -> KernelProgram:
        if len(self._stack) != 1:
            raise RuntimeError("unclosed loop")
        return KernelProgram(
            name=self.name,
            workgroup_dims=workgroup_dims,
            grid_dims=grid_dims,
            shared_bytes=shared_bytes,
            body=tuple(self._stack[0]),
            accumulators=tuple(self._accumulators),
            reg_kinds=dict(self._kinds),
        )

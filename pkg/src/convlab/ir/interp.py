"""Functional execution of kernel programs, all workgroups in lockstep.

Shared-memory accesses are checked between barriers: a read of a word another
thread wrote in the same barrier epoch is a RAW hazard, a write to a word
another thread read in the same epoch is a WAR hazard.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..algos.winograd import ELEMENTS, WinogradPlan, transformed_filters
from ..core.models import ConvShape
from ..core.tensor import Layout, Tensor, convert_layout, feature_map
from ..errors import LaunchError
from .program import Buffer, Instr, KernelProgram, Loop, Node, Op, Pipeline

logger = logging.getLogger(__name__)

_MULTI = -1


@dataclass(frozen=True)
class Hazard:
    kind: str
    instr: int
    lanes: int


@dataclass
class ExecResult:
    buffers: dict[Buffer, np.ndarray]
    hazards: list[Hazard] = field(default_factory=list)
    barriers: int = 0

    @property
    def hazard_free(self) -> bool:
        return not self.hazards


class Interpreter:
    def __init__(self, program: KernelProgram, buffers: dict[Buffer, np.ndarray]) -> None:
        self.program = program
        self.buffers = buffers
        gx, gy, gz = program.grid_dims
        wx, wy = program.workgroup_dims
        n_wg, n_t = gx * gy * gz, wx * wy
        self.shape = (n_wg, n_t)
        wg = np.arange(n_wg).reshape(n_wg, 1)
        t = np.arange(n_t).reshape(1, n_t)
        self.env: dict[str, int | np.ndarray] = {
            "gid_x": wg % gx,
            "gid_y": (wg // gx) % gy,
            "gid_z": wg // (gx * gy),
            "tid_x": t % wx,
            "tid_y": t // wx,
        }
        self.thread = np.broadcast_to(t, self.shape)
        self.wg_index = np.broadcast_to(wg, self.shape)
        self.words = max(program.shared_bytes // 4, 1)
        self.shared = np.zeros(n_wg * self.words, dtype=np.float32)
        size = n_wg * self.words
        self.w_epoch = np.full(size, -1, dtype=np.int64)
        self.w_thread = np.full(size, -1, dtype=np.int64)
        self.r_epoch = np.full(size, -1, dtype=np.int64)
        self.r_thread = np.full(size, -1, dtype=np.int64)
        self.epoch = 0
        self.regs: dict[int, np.ndarray] = {a: np.zeros(self.shape, np.float32) for a in program.accumulators}
        self.hazards: Counter[tuple[str, int]] = Counter()
        self.ids = {id(i): n for n, i in enumerate(program.instructions())}

    def run(self) -> ExecResult:
        self._exec(self.program.body)
        hazards = [Hazard(kind, instr, lanes) for (kind, instr), lanes in sorted(self.hazards.items())]
        if hazards:
            logger.debug("%s: %d shared-memory hazards", self.program.name, len(hazards))
        return ExecResult(self.buffers, hazards, self.epoch)

    def _exec(self, body: tuple[Node, ...]) -> None:
        for node in body:
            if isinstance(node, Loop):
                for it in range(node.count):
                    self.env[node.var] = it
                    self._exec(node.body)
                self.env.pop(node.var, None)
            else:
                self._step(node)

    def _mask(self, instr: Instr) -> np.ndarray:
        if instr.guard is None:
            return np.ones(self.shape, dtype=bool)
        return np.broadcast_to(instr.guard.evaluate(self.env), self.shape)

    def _words(self, instr: Instr) -> np.ndarray:
        addr = np.broadcast_to(np.asarray(instr.addr.evaluate(self.env)), self.shape)
        return addr // 4

    def _step(self, instr: Instr) -> None:
        op = instr.op
        if op is Op.BARRIER:
            self.epoch += 1
        elif op is Op.IALU:
            if instr.dst is not None:
                self.regs[instr.dst] = np.zeros(self.shape, np.float32)
        elif op is Op.FMA:
            a, b, c = (self.regs[s] for s in instr.srcs)
            self.regs[instr.dst] = a * b + c
        elif op is Op.ADD:
            self.regs[instr.dst] = self.regs[instr.srcs[0]] + self.regs[instr.srcs[1]]
        elif op is Op.SUB:
            self.regs[instr.dst] = self.regs[instr.srcs[0]] - self.regs[instr.srcs[1]]
        elif op is Op.MUL:
            self.regs[instr.dst] = self.regs[instr.srcs[0]] * self.regs[instr.srcs[1]]
        elif op.is_global:
            self._global(instr)
        else:
            self._shared(instr)

    def _global(self, instr: Instr) -> None:
        buf = self.buffers[instr.buffer]
        mask = self._mask(instr)
        words = self._words(instr)[mask]
        if words.size and (words.min() < 0 or words.max() >= buf.size):
            raise LaunchError(f"{self.program.name}: {instr.buffer.value} access outside the buffer")
        if instr.op is Op.LD_GLOBAL:
            out = np.zeros(self.shape, np.float32)
            out[mask] = buf[words]
            self.regs[instr.dst] = out
        else:
            buf[words] = self.regs[instr.srcs[0]][mask]

    def _shared(self, instr: Instr) -> None:
        mask = self._mask(instr)
        words = self._words(instr)[mask]
        if words.size and (words.min() < 0 or words.max() >= self.words):
            raise LaunchError(f"{self.program.name}: shared access outside {self.program.shared_bytes} bytes")
        flat = self.wg_index[mask] * self.words + words
        th = self.thread[mask]
        sid = self.ids[id(instr)]
        if instr.op is Op.LD_SHARED:
            raw = (self.w_epoch[flat] == self.epoch) & (self.w_thread[flat] != th)
            if raw.any():
                self.hazards["RAW", sid] += int(raw.sum())
            self._note_reads(flat, th)
            out = np.zeros(self.shape, np.float32)
            out[mask] = self.shared[flat]
            self.regs[instr.dst] = out
        else:
            war = (self.r_epoch[flat] == self.epoch) & (self.r_thread[flat] != th)
            if war.any():
                self.hazards["WAR", sid] += int(war.sum())
            self.w_epoch[flat] = self.epoch
            self.w_thread[flat] = th
            self.shared[flat] = self.regs[instr.srcs[0]][mask]

    def _note_reads(self, flat: np.ndarray, th: np.ndarray) -> None:
        if not flat.size:
            return
        uniq, inv = np.unique(flat, return_inverse=True)
        lo = np.full(uniq.size, np.iinfo(np.int64).max, dtype=np.int64)
        hi = np.full(uniq.size, -1, dtype=np.int64)
        np.minimum.at(lo, inv, th)
        np.maximum.at(hi, inv, th)
        fresh = self.r_epoch[uniq] != self.epoch
        same = self.r_thread[uniq] == lo
        reader = np.where(fresh | same, lo, _MULTI)
        reader = np.where(lo != hi, _MULTI, reader)
        self.r_epoch[uniq] = self.epoch
        self.r_thread[uniq] = reader


def execute(program: KernelProgram, buffers: dict[Buffer, np.ndarray]) -> ExecResult:
    """Run `program` over every workgroup, updating `buffers` in place."""
    return Interpreter(program, buffers).run()


def _words_needed(buffer: Buffer, shape: ConvShape) -> int:
    if buffer is Buffer.COL:
        return shape.C * shape.taps * shape.out_pixels
    plan = WinogradPlan.for_shape(shape)
    if buffer is Buffer.V:
        return ELEMENTS * shape.C * plan.tiles
    if buffer is Buffer.M:
        return ELEMENTS * shape.K * plan.tiles
    raise KeyError(buffer)


def prepare_buffers(pipeline: Pipeline, shape: ConvShape, inp: Tensor, filters: Tensor) -> dict[Buffer, np.ndarray]:
    """Flat fp32 global buffers for `pipeline`; filters arrive KCRS and are re-laid out as it expects."""
    used = {i.buffer for k in pipeline for i in k.instructions() if i.buffer is not None}
    buffers = {
        Buffer.INPUT: inp.flat().copy(),
        Buffer.FILTER: convert_layout(filters, Layout(pipeline.filter_layout)).flat().copy(),
        Buffer.OUTPUT: np.zeros(shape.K * shape.out_pixels, np.float32),
    }
    if Buffer.U in used:
        buffers[Buffer.U] = transformed_filters(filters).reshape(-1).copy()
    for buffer in (Buffer.COL, Buffer.V, Buffer.M):
        if buffer in used:
            buffers[buffer] = np.zeros(_words_needed(buffer, shape), np.float32)
    return buffers


def run_pipeline(pipeline: Pipeline, shape: ConvShape, inp: Tensor, filters: Tensor) -> tuple[Tensor, list[ExecResult]]:
    buffers = prepare_buffers(pipeline, shape, inp, filters)
    results = [execute(kernel, buffers) for kernel in pipeline]
    out = buffers[Buffer.OUTPUT].reshape(shape.K, shape.out_h, shape.out_w)
    return feature_map(out), results

from __future__ import annotations

from .program import Instr, KernelProgram, Loop, Node, Op, Pipeline

INDENT = "  "


def format_instr(instr: Instr) -> str:
    srcs = ", ".join(f"r{s}" for s in instr.srcs)
    if instr.op is Op.BARRIER:
        line = "BARRIER"
    elif instr.op.is_load:
        line = f"r{instr.dst} = {instr.op.value} {instr.buffer.value}[{instr.addr.text()}]"
        if srcs:
            line += f" base {srcs}"
    elif instr.op.is_store:
        line = f"{instr.op.value} {instr.buffer.value}[{instr.addr.text()}] <- {srcs}"
    elif instr.dst is None:
        line = f"{instr.op.value} {srcs}".rstrip()
    else:
        line = f"r{instr.dst} = {instr.op.value} {srcs}".rstrip()
    if instr.guard is not None and instr.guard.bounds:
        line += f" if {instr.guard.text()}"
    if instr.uniform:
        line += " [uniform]"
    return line


def _lines(body: tuple[Node, ...], depth: int) -> list[str]:
    pad = INDENT * depth
    out: list[str] = []
    for node in body:
        if isinstance(node, Loop):
            out.append(f"{pad}LOOP {node.var} {node.count} {{")
            out += _lines(node.body, depth + 1)
            out.append(f"{pad}}}")
        else:
            out.append(pad + format_instr(node))
    return out


def to_text(program: KernelProgram) -> str:
    """One instruction per line; affine coefficients spelled out in bytes."""
    wx, wy = program.workgroup_dims
    gx, gy, gz = program.grid_dims
    head = [f"kernel {program.name} workgroup={wx}x{wy} grid={gx}x{gy}x{gz} shared={program.shared_bytes}"]
    if program.accumulators:
        head.append("accumulators " + " ".join(f"r{a}" for a in program.accumulators))
    return "\n".join(head + _lines(program.body, 0)) + "\n"


def pipeline_text(pipeline: Pipeline) -> str:
    return "\n".join(to_text(k) for k in pipeline)

from __future__ import annotations

from dataclasses import dataclass

from ..core.models import ceil_div
from .builder import KernelBuilder
from .lower_tiles import WORD, A
from .program import Affine, Buffer, KernelProgram, RegKind, bound


@dataclass(frozen=True)
class Operand:
    """Row-major matrix in `buffer`; batch `z` starts at z * batch_stride words."""

    buffer: Buffer
    ld: int
    batch_stride: int = 0
    kind: RegKind = RegKind.TEMP

    def word(self, row: Affine, col: Affine) -> Affine:
        return row * self.ld + col + A(0, gid_z=self.batch_stride)


def gemm_kernel(name: str, m: int, n: int, k: int, a: Operand, b_op: Operand, c: Operand,
                tile_m: int, tile_n: int, tile_k: int, batch: int = 1) -> KernelProgram:
    """C = A @ B with one thread per element of C and shared-memory tiles of A and B.

    The workgroup is tile_n x tile_m threads. Each k-tile is loaded cooperatively,
    zero-padded past the matrix edges, then consumed between two barriers.
    """
    b = KernelBuilder(name)
    acc = b.accumulator()
    row, col = A(0, gid_y=tile_m, tid_y=1), A(0, gid_x=tile_n, tid_x=1)
    a_tile, b_tile = 0, tile_m * tile_k
    with b.loop("kt", ceil_div(k, tile_k)):
        with b.loop("ja", ceil_div(tile_k, tile_n)):
            kc = A(0, ja=tile_n, tid_x=1)
            gk = kc + A(0, kt=tile_k)
            in_tile = bound(kc, 0, tile_k)
            v = b.ld_global(a.buffer, a.word(row, gk) * WORD, a.kind, in_tile & bound(gk, 0, k) & bound(row, 0, m))
            b.st_shared((A(a_tile, tid_y=tile_k) + kc) * WORD, v, in_tile)
        with b.loop("ib", ceil_div(tile_k, tile_m)):
            kr = A(0, ib=tile_m, tid_y=1)
            gk = kr + A(0, kt=tile_k)
            in_tile = bound(kr, 0, tile_k)
            v = b.ld_global(b_op.buffer, b_op.word(gk, col) * WORD, b_op.kind, in_tile & bound(gk, 0, k) & bound(col, 0, n))
            b.st_shared((kr * tile_n + A(b_tile, tid_x=1)) * WORD, v, in_tile)
        b.barrier()
        for kk in range(tile_k):
            x = b.ld_shared(A(a_tile + kk, tid_y=tile_k) * WORD, a.kind)
            y = b.ld_shared(A(b_tile + kk * tile_n, tid_x=1) * WORD, b_op.kind)
            b.fma(acc, x, y)
        b.barrier()
    b.st_global(c.buffer, c.word(row, col) * WORD, acc, bound(row, 0, m) & bound(col, 0, n))
    grid = (ceil_div(n, tile_n), ceil_div(m, tile_m), batch)
    shared = (tile_m * tile_k + tile_k * tile_n) * WORD
    return b.build((tile_n, tile_m), grid, shared)

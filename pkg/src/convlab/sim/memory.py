"""Memory-system models: global coalescing, shared-memory banks and an LRU L2."""

from __future__ import annotations

from collections import OrderedDict
from collections.abc import Iterable

import numpy as np

from .machine import MachineConfig


def coalesce(addresses: Iterable[int], segment_bytes: int = 128) -> int:
    """Distinct aligned segments one warp access touches."""
    return len({int(a) // segment_bytes for a in addresses})


def bank_conflicts(addresses: Iterable[int], banks: int = 32) -> int:
    """Extra cycles of a warp's shared access: the busiest bank's distinct words, minus one.

    Lanes reading the same word are served by one broadcast.
    """
    words = {int(a) // 4 for a in addresses}
    if not words:
        return 0
    per_bank: dict[int, int] = {}
    for w in words:
        per_bank[w % banks] = per_bank.get(w % banks, 0) + 1
    return max(per_bank.values()) - 1


def _distinct_sorted(keys: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per row: sorted keys with inactive lanes pushed to the end, and a first-occurrence flag."""
    big = np.iinfo(np.int64).max
    k = np.sort(np.where(mask, keys, big), axis=-1)
    first = np.ones_like(k, dtype=bool)
    first[..., 1:] = k[..., 1:] != k[..., :-1]
    return k, first & (k != big)


def warp_segments(addr: np.ndarray, mask: np.ndarray, unit: int) -> np.ndarray:
    """Distinct `unit`-byte blocks per warp; addr and mask are (..., warp_size)."""
    _, first = _distinct_sorted(addr // unit, mask)
    return first.sum(axis=-1)


def warp_lines(addr: np.ndarray, mask: np.ndarray, line_bytes: int) -> list[np.ndarray]:
    """Distinct line ids per warp, in ascending order, flattened over leading dims."""
    k, first = _distinct_sorted(addr // line_bytes, mask)
    k = k.reshape(-1, k.shape[-1])
    first = first.reshape(-1, first.shape[-1])
    return [row[f] for row, f in zip(k, first)]


def warp_conflicts(addr: np.ndarray, mask: np.ndarray, banks: int) -> np.ndarray:
    """Vectorized bank_conflicts over (..., warp_size) shared byte addresses."""
    words, first = _distinct_sorted(addr // 4, mask)
    lead = words.shape[:-1]
    flat_words = words.reshape(-1, words.shape[-1])
    flat_first = first.reshape(-1, first.shape[-1])
    rows = np.nonzero(flat_first)[0]
    if rows.size == 0:
        return np.zeros(lead, dtype=np.int64)
    bank = flat_words[flat_first] % banks
    counts = np.zeros((flat_words.shape[0], banks), dtype=np.int64)
    np.add.at(counts, (rows, bank), 1)
    degree = counts.max(axis=1)
    return np.maximum(degree - 1, 0).reshape(lead)


class LRUCache:
    """Fully associative, least-recently-used line cache."""

    def __init__(self, lines: int, line_bytes: int) -> None:
        self.capacity = lines
        self.line_bytes = line_bytes
        self.lines: OrderedDict[int, None] = OrderedDict()
        self.misses = 0

    def access(self, line: int) -> bool:
        if line in self.lines:
            self.lines.move_to_end(line)
            return True
        self.misses += 1
        self.lines[line] = None
        if len(self.lines) > self.capacity:
            self.lines.popitem(last=False)
        return False

    @property
    def fill_bytes(self) -> int:
        return self.misses * self.line_bytes


def l2_filter(access_stream: Iterable[tuple[int, int]], m: MachineConfig) -> int:
    """DRAM bytes behind the L2 for an ordered stream of (address, size) reads."""
    cache = LRUCache(m.l2_lines, m.l2_line_bytes)
    for address, size in access_stream:
        first = address // m.l2_line_bytes
        last = (address + max(size, 1) - 1) // m.l2_line_bytes
        for line in range(first, last + 1):
            cache.access(line)
    return cache.fill_bytes

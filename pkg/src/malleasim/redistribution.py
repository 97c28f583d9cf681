"""Data redistribution plans between an old and a new process group.

Two 1D layouts are supported: a uniform contiguous chunking (``Default1D``)
and a round-robin block distribution (``BlockCyclic``).  Group sizes must be
multiples or divisors of each other.  A plan is a list of ``Transfer``
records; ``apply_plan`` executes one on concrete arrays so plans can be
checked against the ownership maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import IncompatibleGroups, IndivisibleData, OutOfBounds, ShapeError

EXPAND, SHRINK, NONE = "expand", "shrink", "none"


@dataclass(frozen=True)
class Default1D:
    total_elements: int
    procs: int

    def __post_init__(self):
        if self.procs < 1:
            raise IncompatibleGroups(f"procs must be >= 1, got {self.procs}")
        if self.total_elements < 0 or self.total_elements % self.procs:
            raise IndivisibleData(
                f"{self.total_elements} elements cannot be split evenly over {self.procs} procs")

    @property
    def total(self) -> int:
        return self.total_elements

    @property
    def chunk(self) -> int:
        return self.total_elements // self.procs

    def local_size(self, rank: int) -> int:
        return self.chunk

    def local_offset(self, g: int) -> int:
        return g - (g // self.chunk) * self.chunk


@dataclass(frozen=True)
class BlockCyclic:
    num_blocks: int
    block_size: int
    procs: int

    def __post_init__(self):
        if self.procs < 1:
            raise IncompatibleGroups(f"procs must be >= 1, got {self.procs}")
        if self.block_size < 1:
            raise IndivisibleData(f"block_size must be >= 1, got {self.block_size}")
        if self.num_blocks < self.procs:
            raise IndivisibleData(
                f"{self.num_blocks} blocks cannot cover {self.procs} procs")

    @property
    def total(self) -> int:
        return self.num_blocks * self.block_size

    def local_size(self, rank: int) -> int:
        nblocks = (self.num_blocks - rank + self.procs - 1) // self.procs
        return nblocks * self.block_size

    def local_offset(self, g: int) -> int:
        block = g // self.block_size
        return (block // self.procs) * self.block_size + g % self.block_size


Layout = Union[Default1D, BlockCyclic]


@dataclass(frozen=True)
class Transfer:
    src_rank: int
    dst_rank: int
    global_start: int
    count: int

    @property
    def global_stop(self) -> int:
        return self.global_start + self.count


@dataclass(frozen=True)
class RedistributionPlan:
    direction: str
    old_procs: int
    new_procs: int
    transfers: tuple[Transfer, ...]
    old_layout: Layout
    new_layout: Layout

    @property
    def factor(self) -> int:
        return max(self.old_procs, self.new_procs) // min(self.old_procs, self.new_procs)

    @property
    def total_elements(self) -> int:
        return self.new_layout.total


def owner_of(layout: Layout, global_index: int) -> int:
    if not 0 <= global_index < layout.total:
        raise OutOfBounds(f"index {global_index} outside [0, {layout.total})")
    if isinstance(layout, Default1D):
        return global_index // layout.chunk
    return (global_index // layout.block_size) % layout.procs


def classify_resize(old_procs: int, new_procs: int) -> tuple[str, int]:
    """Return ``(direction, factor)`` or raise for a non multiple/divisible pair."""
    if old_procs < 1 or new_procs < 1:
        raise IncompatibleGroups(f"group sizes must be >= 1, got {old_procs} -> {new_procs}")
    if new_procs % old_procs == 0:
        factor = new_procs // old_procs
        return (EXPAND if factor > 1 else NONE), factor
    if old_procs % new_procs == 0:
        return SHRINK, old_procs // new_procs
    raise IncompatibleGroups(
        f"{old_procs} -> {new_procs}: new group must be a multiple or divisor of the old one")


def plan_default(total_elements: int, old_procs: int, new_procs: int) -> RedistributionPlan:
    direction, factor = classify_resize(old_procs, new_procs)
    if total_elements % max(old_procs, new_procs):
        raise IndivisibleData(
            f"{total_elements} elements not divisible by {max(old_procs, new_procs)} procs")
    old = Default1D(total_elements, old_procs)
    new = Default1D(total_elements, new_procs)
    transfers = []
    if total_elements:
        if direction == SHRINK:
            # child c concatenates parents c*factor .. c*factor+factor-1 in order
            for child in range(new_procs):
                for i in range(factor):
                    src = child * factor + i
                    transfers.append(Transfer(src, child, src * old.chunk, old.chunk))
        else:
            for rank in range(old_procs):
                for i in range(factor):
                    transfers.append(Transfer(
                        rank, rank * factor + i, rank * old.chunk + i * new.chunk, new.chunk))
    return RedistributionPlan(direction, old_procs, new_procs, tuple(transfers), old, new)


def plan_blockcyclic(num_blocks: int, block_size: int, old_procs: int,
                     new_procs: int) -> RedistributionPlan:
    direction, _ = classify_resize(old_procs, new_procs)
    old = BlockCyclic(num_blocks, block_size, old_procs)
    new = BlockCyclic(num_blocks, block_size, new_procs)
    # adjacent blocks with the same (src, dst) pair coalesce into one run
    runs: list[list[int]] = []
    for b in range(num_blocks):
        src, dst = b % old_procs, b % new_procs
        if runs and runs[-1][0] == src and runs[-1][1] == dst:
            runs[-1][3] += block_size
        else:
            runs.append([src, dst, b * block_size, block_size])
    transfers = [Transfer(*run) for run in runs]
    return RedistributionPlan(direction, old_procs, new_procs, tuple(transfers), old, new)


def scatter(global_array: np.ndarray, layout: Layout) -> list[np.ndarray]:
    """Split a global array into per-rank local arrays for ``layout``."""
    global_array = np.asarray(global_array)
    if global_array.shape[:1] != (layout.total,):
        raise ShapeError(f"array of length {len(global_array)} does not match "
                         f"layout with {layout.total} elements")
    if isinstance(layout, Default1D):
        return [global_array[r * layout.chunk:(r + 1) * layout.chunk].copy()
                for r in range(layout.procs)]
    blocks = global_array.reshape(layout.num_blocks, layout.block_size, *global_array.shape[1:])
    return [blocks[r::layout.procs].reshape(-1, *global_array.shape[1:]).copy()
            for r in range(layout.procs)]


def gather(local_arrays: Sequence[np.ndarray], layout: Layout) -> np.ndarray:
    """Inverse of :func:`scatter`."""
    if len(local_arrays) != layout.procs:
        raise ShapeError(f"expected {layout.procs} local arrays, got {len(local_arrays)}")
    if isinstance(layout, Default1D):
        return np.concatenate(local_arrays) if local_arrays else np.empty(0)
    out = np.empty((layout.total, *local_arrays[0].shape[1:]), dtype=local_arrays[0].dtype)
    bs = layout.block_size
    for r, local in enumerate(local_arrays):
        for j, b in enumerate(range(r, layout.num_blocks, layout.procs)):
            out[b * bs:(b + 1) * bs] = local[j * bs:(j + 1) * bs]
    return out


def execute_plan(old_locals: Sequence[np.ndarray], plan: RedistributionPlan) -> list[np.ndarray]:
    """Move data from old-group local arrays to new-group local arrays,
    one transfer at a time."""
    old_layout, new_layout = plan.old_layout, plan.new_layout
    if len(old_locals) != plan.old_procs:
        raise ShapeError(f"expected {plan.old_procs} local arrays, got {len(old_locals)}")
    for r, local in enumerate(old_locals):
        if len(local) != old_layout.local_size(r):
            raise ShapeError(f"rank {r} holds {len(local)} elements, "
                             f"layout expects {old_layout.local_size(r)}")
    sample = old_locals[0]
    new_locals = [np.empty((new_layout.local_size(r), *sample.shape[1:]), dtype=sample.dtype)
                  for r in range(plan.new_procs)]
    for t in plan.transfers:
        # a transfer may span several blocks; copy contiguous runs piecewise
        g = t.global_start
        while g < t.global_stop:
            run = t.global_stop - g
            if isinstance(old_layout, BlockCyclic):
                run = min(run, old_layout.block_size - g % old_layout.block_size)
            if isinstance(new_layout, BlockCyclic):
                run = min(run, new_layout.block_size - g % new_layout.block_size)
            s = old_layout.local_offset(g)
            d = new_layout.local_offset(g)
            new_locals[t.dst_rank][d:d + run] = old_locals[t.src_rank][s:s + run]
            g += run
    return new_locals


def apply_plan(global_array, plan: RedistributionPlan) -> list[np.ndarray]:
    """Scatter ``global_array`` over the old layout and run ``plan`` on it."""
    global_array = np.asarray(global_array)
    if len(global_array) != plan.old_layout.total:
        raise ShapeError(f"array of length {len(global_array)} does not match plan "
                         f"over {plan.old_layout.total} elements")
    return execute_plan(scatter(global_array, plan.old_layout), plan)


def transfer_cost(plan: RedistributionPlan, bytes_per_element: float,
                  bandwidth_bytes_per_s: float, latency_s_per_transfer: float = 0.0) -> float:
    """Latency per remote transfer plus remote bytes over bandwidth.

    Transfers whose source and destination rank coincide stay on the same
    node and cost nothing.
    """
    if bandwidth_bytes_per_s <= 0:
        raise ValueError("bandwidth must be positive")
    remote = [t for t in plan.transfers if t.src_rank != t.dst_rank]
    nbytes = sum(t.count for t in remote) * bytes_per_element
    return latency_s_per_transfer * len(remote) + nbytes / bandwidth_bytes_per_s


def plan_to_text(plan: RedistributionPlan) -> str:
    return "".join(f"{t.src_rank} {t.dst_rank} {t.global_start} {t.count}\n"
                   for t in plan.transfers)


def transfers_from_text(text: str) -> list[Transfer]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ValueError(f"line {lineno}: expected 'src dst start count'")
        out.append(Transfer(*map(int, fields)))
    return out

"""Simulated resource manager: FCFS + backfill over whole nodes, moldable
start sizes, and the expand/shrink policy for malleable jobs.

Nodes freed by a policy shrink are reserved for the pending job that
motivated it, so neither backfill nor another job's expansion can take them
before that job starts.
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .errors import InvariantViolation
from .profiles import ApplicationProfile
from .reconfig import NO_ACTION, Expand, Shrink
from .workload import Job

MAX_PRIORITY = 2**31 - 1
DEFAULT_TICK_S = 10.0


@dataclass
class ClusterState:
    total_nodes: int = 128
    free_nodes: int = -1
    allocations: dict[int, int] = field(default_factory=dict)
    # promoted job id -> nodes held back for it
    reservations: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.free_nodes < 0:
            self.free_nodes = self.total_nodes - sum(self.allocations.values())
        self.check()

    def check(self) -> None:
        if self.free_nodes < 0:
            raise InvariantViolation(f"negative free nodes: {self.free_nodes}")
        if self.free_nodes + sum(self.allocations.values()) != self.total_nodes:
            raise InvariantViolation("free + allocated != total nodes")
        if any(n < 1 for n in self.allocations.values()):
            raise InvariantViolation("allocation below one node")

    @property
    def allocated(self) -> int:
        return self.total_nodes - self.free_nodes

    def unreserved_free(self, for_job: int | None = None) -> int:
        held = sum(n for j, n in self.reservations.items() if j != for_job)
        return max(0, self.free_nodes - held)

    def allocate(self, job_id: int, nodes: int) -> None:
        if nodes > self.free_nodes:
            raise InvariantViolation(f"job {job_id} wants {nodes} nodes, {self.free_nodes} free")
        self.allocations[job_id] = self.allocations.get(job_id, 0) + nodes
        self.free_nodes -= nodes
        self.reservations.pop(job_id, None)

    def release(self, job_id: int, nodes: int | None = None) -> None:
        held = self.allocations[job_id]
        nodes = held if nodes is None else nodes
        if nodes > held:
            raise InvariantViolation(f"job {job_id} releases {nodes} of {held} nodes")
        if nodes == held:
            del self.allocations[job_id]
        else:
            self.allocations[job_id] = held - nodes
        self.free_nodes += nodes


@dataclass(frozen=True)
class QueueEntry:
    job_id: int
    priority: int
    enqueue_time: float

    @property
    def key(self):
        return (-self.priority, self.enqueue_time, self.job_id)


class JobQueue:
    """Pending jobs ordered by (priority desc, enqueue time, job id)."""

    def __init__(self):
        self._keys: list = []
        self._entries: dict[int, QueueEntry] = {}
        self._promotions = 0

    def push(self, job_id: int, enqueue_time: float, priority: int = 0) -> None:
        entry = QueueEntry(job_id, priority, enqueue_time)
        self._entries[job_id] = entry
        bisect.insort(self._keys, entry.key)

    def remove(self, job_id: int) -> None:
        entry = self._entries.pop(job_id)
        i = bisect.bisect_left(self._keys, entry.key)
        del self._keys[i]

    def promote(self, job_id: int) -> None:
        """Move a job to the top priority band; earlier promotions stay ahead."""
        entry = self._entries[job_id]
        self.remove(job_id)
        self._promotions += 1
        self.push(job_id, entry.enqueue_time, MAX_PRIORITY - self._promotions)

    def __contains__(self, job_id: int) -> bool:
        return job_id in self._entries

    def __len__(self) -> int:
        return len(self._keys)

    def __iter__(self) -> Iterator[QueueEntry]:
        for key in list(self._keys):
            yield self._entries[key[2]]

    def ids(self) -> list[int]:
        return [k[2] for k in self._keys]


def valid_configs(job: Job, profile: ApplicationProfile) -> list[int]:
    return [p for p in profile.process_counts if job.lower <= p <= job.upper]


def initial_allocation(job: Job, available: int,
                       profile: ApplicationProfile | None = None,
                       valid: list[int] | None = None) -> int | None:
    """Node count to start ``job`` with, or ``None`` to defer it.

    Rigid jobs get exactly their request.  Moldable jobs get the largest
    measured configuration within their limits that fits.
    """
    if job.rigid:
        return job.request if job.request <= available else None
    if valid is None:
        valid = valid_configs(job, profile)
    fits = [p for p in valid if p <= available]
    return fits[-1] if fits else None


def expansion_target(current: int, valid: list[int], upper: int, budget: int) -> int | None:
    """Largest valid multiple of ``current`` reachable with ``budget`` extra nodes."""
    best = None
    for t in valid:
        if t > current and t % current == 0 and t <= upper and t - current <= budget:
            best = t
    return best


@dataclass(frozen=True)
class Decision:
    action: object
    branch: int  # 0 when nothing applies
    promoted: int | None = None


class Scheduler:
    """Queue + cluster bookkeeping driven by the simulation engine."""

    def __init__(self, total_nodes: int, jobs: Mapping[int, Job],
                 profiles: Mapping[str, ApplicationProfile], tick_s: float = DEFAULT_TICK_S):
        self.cluster = ClusterState(total_nodes)
        self.queue = JobQueue()
        self.jobs = jobs
        self.profiles = profiles
        self.tick_s = tick_s
        self._valid: dict[int, list[int]] = {}
        # smallest start size of every queued job, so queue walks can stop early
        self._need = {j: job.min_nodes for j, job in jobs.items()}
        self._queued_needs: Counter = Counter()

    def _min_queued_need(self) -> int:
        return min(n for n, c in self._queued_needs.items() if c) if self.queue else 0

    def _dequeue(self, job_id: int) -> None:
        self.queue.remove(job_id)
        self._queued_needs[self._need[job_id]] -= 1

    def valid(self, job_id: int) -> list[int]:
        v = self._valid.get(job_id)
        if v is None:
            job = self.jobs[job_id]
            v = self._valid[job_id] = valid_configs(job, self.profiles[job.app])
        return v

    def submit(self, job_id: int, now: float) -> None:
        self.queue.push(job_id, now)
        self._queued_needs[self._need[job_id]] += 1

    def _alloc_for(self, job_id: int, available: int) -> int | None:
        return initial_allocation(self.jobs[job_id], available, valid=self.valid(job_id))

    def schedule_pass(self, now: float) -> list[tuple[int, int]]:
        """Start every queued job that fits, in priority order.

        A job that cannot start does not block the ones behind it.  The
        returned starts are already allocated on the cluster.
        """
        starts = []
        cluster = self.cluster
        need = self._need
        held_ahead = 0  # reservations of promoted jobs that could not start yet
        for entry in self.queue:
            jid = entry.job_id
            if jid in cluster.reservations:
                # promoted jobs sit at the head and yield only to earlier
                # promotions; beyond their reserved size they may not grow
                # into nodes held for later ones
                if need[jid] > cluster.free_nodes - held_ahead:
                    held_ahead += cluster.reservations[jid]
                    continue
                avail = max(need[jid], cluster.unreserved_free(jid))
            else:
                # past the promoted jobs a too-small pool ends the pass
                avail = cluster.unreserved_free()
                if avail < self._min_queued_need():
                    break
                if need[jid] > avail:
                    continue
            n = self._alloc_for(jid, avail)
            cluster.allocate(jid, n)
            self._dequeue(jid)
            starts.append((jid, n))
        return starts

    def resize_decision(self, job_id: int, current: int) -> Decision:
        """Pick an action for a malleable job that just checked in.

        Branches, in order: grow towards preferred; shrink to preferred when
        that lets a specific pending job start (which is then promoted); grow
        into nodes that neither the next scheduling pass nor the
        highest-priority blocked job will use; grow into free nodes when
        nothing is pending.
        """
        job = self.jobs[job_id]
        valid = self.valid(job_id)
        avail = self.cluster.unreserved_free()

        def expand(budget: int, branch: int) -> Decision:
            t = expansion_target(current, valid, job.upper, budget) if budget > 0 else None
            return Decision(Expand(t), branch) if t else Decision(NO_ACTION, 0)

        if current < job.preferred:
            return expand(avail, 1) if avail > 0 else Decision(NO_ACTION, 0)

        reservations = self.cluster.reservations
        if len(self.queue) == len(reservations):
            return expand(avail, 4)

        can_shrink = current > job.preferred and current % job.preferred == 0
        freed = current - job.preferred if can_shrink else 0
        sim_free = avail
        blocked = None
        need = self._need
        floor = self._min_queued_need()
        # sim_free never grows, so a need that failed once fails again
        failed = None
        for pid in self.queue.ids():
            if pid in reservations:
                continue
            n_min = need[pid]
            if failed is not None and n_min >= failed:
                continue
            if n_min <= sim_free:
                sim_free -= self._alloc_for(pid, sim_free)
                continue
            if n_min <= sim_free + freed:
                self.queue.promote(pid)
                reservations[pid] = n_min
                return Decision(Shrink(job.preferred), 2, promoted=pid)
            if blocked is None:
                blocked = n_min
            failed = n_min
            if failed <= floor:
                break
        # growth must not eat nodes the highest-priority blocked job is waiting for
        return expand(sim_free - (blocked or 0), 3)

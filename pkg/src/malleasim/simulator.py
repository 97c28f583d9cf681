"""Discrete-event engine tying together arrivals, scheduling ticks,
iteration check points, and reconfigurations.

Events at the same instant run in a fixed kind order (arrivals, finished
reconfigurations, check points, job completions, scheduler tick) and then by
job id, so a run is a pure function of its inputs.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import InvariantViolation, Unschedulable
from .profiles import ApplicationProfile
from .reconfig import (Expand, NoAction, OverheadModel, ReconfigState, begin_resize,
                       should_check)
from .scheduler import DEFAULT_TICK_S, Scheduler
from .workload import Job

log = logging.getLogger(__name__)

ARRIVAL, RECONFIG_DONE, ITERATION, JOB_DONE, TICK = range(5)


@dataclass(frozen=True)
class SimConfig:
    total_nodes: int = 128
    tick_s: float = DEFAULT_TICK_S
    malleability: bool = True
    overhead: OverheadModel = field(default_factory=OverheadModel)


@dataclass(frozen=True)
class ResizeEvent:
    time: float
    kind: str
    from_procs: int
    to_procs: int
    overhead_s: float
    done_time: float
    branch: int
    promoted: int | None = None


@dataclass
class JobRecord:
    job_id: int
    app: str
    job_class: str
    submit: float
    start: float = math.nan
    end: float = math.nan
    iterations: int = 0
    iterations_done: int = 0
    allocations: list[tuple[float, int]] = field(default_factory=list)
    resizes: list[ResizeEvent] = field(default_factory=list)

    @property
    def reconfig_time(self) -> float:
        return sum(r.overhead_s for r in self.resizes)


@dataclass
class SimulationTrace:
    total_nodes: int
    start_time: float
    end_time: float
    jobs: list[JobRecord]
    # (t, allocated_nodes, running_jobs, completed_jobs), piecewise constant from t
    series: list[tuple[float, int, int, int]]
    ticks: list[float] = field(default_factory=list)

    @property
    def makespan(self) -> float:
        return self.end_time - self.start_time


@dataclass
class _Run:
    job: Job
    profile: ApplicationProfile
    record: JobRecord
    procs: int
    iterations: int
    ref_iterations: int
    rstate: ReconfigState
    done: int = 0
    seg_time: float = 0.0
    seg_iters: int = 0
    pending: tuple | None = None  # (action, ResizeEvent) while reconfiguring

    def time_at(self, k: int) -> float:
        t_p = self.profile.measured_timings[self.procs]
        return self.seg_time + t_p * (k - self.seg_iters) / self.ref_iterations


class Engine:
    def __init__(self, jobs: Sequence[Job], profiles: Mapping[str, ApplicationProfile],
                 config: SimConfig = SimConfig()):
        self.config = config
        self.jobs = {j.job_id: j for j in jobs}
        if len(self.jobs) != len(jobs):
            raise ValueError("duplicate job ids in workload")
        self.profiles = profiles
        for j in jobs:
            if j.app not in profiles:
                raise Unschedulable(f"job {j.job_id}: no profile for application {j.app!r}")
            if j.min_nodes > config.total_nodes:
                raise Unschedulable(
                    f"job {j.job_id} needs {j.min_nodes} nodes, cluster has {config.total_nodes}")
        self.sched = Scheduler(config.total_nodes, self.jobs, profiles, config.tick_s)
        self.records = {j.job_id: JobRecord(j.job_id, j.app, j.job_class.value, j.submit_time)
                        for j in jobs}
        self.runs: dict[int, _Run] = {}
        self._heap: list = []
        self._seq = itertools.count()
        self.completed = 0
        self.series: list[tuple[float, int, int, int]] = []
        self.ticks: list[float] = []
        self._arrivals_left = len(jobs)
        self._next_arrival = sorted(j.submit_time for j in jobs)

    def _push(self, time: float, kind: int, job_id: int = -1, payload=None) -> None:
        heapq.heappush(self._heap, (time, kind, job_id, next(self._seq), payload))

    def _malleable(self, run: _Run) -> bool:
        return self.config.malleability and run.job.malleable

    # -- progress ------------------------------------------------------------

    def _gate(self, run: _Run, time: float, k: int) -> bool:
        # inhibitors, plus at most one decision per job per tick interval
        rs = run.rstate
        return should_check(rs, time, k) and time - rs.last_check_time >= self.config.tick_s

    def _schedule_next(self, run: _Run) -> None:
        n = run.iterations
        if not self._malleable(run):
            self._push(run.time_at(n), JOB_DONE, run.job.job_id)
            return
        rs = run.rstate
        k = run.done + max(1, rs.inhibitor_iterations - (run.done - rs.last_check_iteration))
        gate_time = rs.last_check_time + max(rs.inhibitor_period_s, self.config.tick_s)
        t_p = run.profile.measured_timings[run.procs]
        guess = run.seg_iters + math.ceil((gate_time - run.seg_time) * run.ref_iterations / t_p) - 1
        k = max(k, min(guess, n))
        while k < n and not self._gate(run, run.time_at(k), k):
            k += 1
        if k >= n:
            self._push(run.time_at(n), JOB_DONE, run.job.job_id)
        else:
            self._push(run.time_at(k), ITERATION, run.job.job_id, k)

    def _start(self, job_id: int, procs: int, now: float) -> None:
        job = self.jobs[job_id]
        profile = self.profiles[job.app]
        iterations, ref = profile.job_iterations(procs)
        rec = self.records[job_id]
        rec.start = now
        rec.iterations = iterations
        rec.allocations.append((now, procs))
        rstate = ReconfigState(profile.inhibitor_period_s, profile.inhibitor_iterations)
        rstate.reset_checks(now, 0)
        run = _Run(job, profile, rec, procs, iterations, ref, rstate, seg_time=now)
        self.runs[job_id] = run
        self._schedule_next(run)

    # -- handlers ------------------------------------------------------------

    def _on_tick(self, now: float) -> None:
        self.ticks.append(now)
        for job_id, procs in self.sched.schedule_pass(now):
            self._start(job_id, procs, now)
        if self.completed == len(self.jobs):
            return
        nxt = now + self.config.tick_s
        if not self.sched.queue and self._arrivals_left:
            # idle until the next arrival; skip empty ticks
            first = self._next_arrival[len(self.jobs) - self._arrivals_left]
            nxt = max(nxt, math.ceil(first / self.config.tick_s) * self.config.tick_s)
        if self.sched.queue or self._arrivals_left:
            self._push(nxt, TICK)

    def _on_iteration(self, run: _Run, now: float, k: int) -> None:
        run.done = k
        run.record.iterations_done = k
        job_id = run.job.job_id
        run.rstate.await_decision(now, k)
        decision = self.sched.resize_decision(job_id, run.procs)
        if isinstance(decision.action, NoAction):
            run.rstate.decline()
            self._schedule_next(run)
            return
        action = decision.action
        _, cost = begin_resize(
            run.rstate, run.procs, action, lower=run.job.lower, upper=run.job.upper,
            valid=self.sched.valid(job_id), total_bytes=run.profile.total_bytes,
            overhead=self.config.overhead)
        event = ResizeEvent(now, action.kind, run.procs, action.to, cost, now + cost,
                            decision.branch, decision.promoted)
        if isinstance(action, Expand):
            self.sched.cluster.allocate(job_id, action.to - run.procs)
            run.record.allocations.append((now, action.to))
        run.record.resizes.append(event)
        run.pending = (action, event)
        self._push(now + cost, RECONFIG_DONE, job_id)

    def _on_reconfig_done(self, run: _Run, now: float) -> None:
        action, _ = run.pending
        run.pending = None
        if action.to < run.procs:
            self.sched.cluster.release(run.job.job_id, run.procs - action.to)
            run.record.allocations.append((now, action.to))
        run.procs = action.to
        run.seg_time, run.seg_iters = now, run.done
        run.rstate.finish()
        self._schedule_next(run)

    def _on_done(self, run: _Run, now: float) -> None:
        job_id = run.job.job_id
        run.done = run.iterations
        run.record.iterations_done = run.iterations
        run.record.end = now
        self.sched.cluster.release(job_id)
        del self.runs[job_id]
        self.completed += 1

    def _check(self, now: float) -> None:
        cluster = self.sched.cluster
        cluster.check()
        for job_id, n in cluster.allocations.items():
            job = self.jobs[job_id]
            if job.rigid and not (self.config.malleability and job.malleable):
                ok = n == job.request
            else:
                ok = job.lower <= n <= job.upper
            if not ok:
                raise InvariantViolation(
                    f"t={now}: job {job_id} holds {n} nodes outside its bounds")

    def _record(self, now: float) -> None:
        point = (now, self.sched.cluster.allocated, len(self.runs), self.completed)
        if self.series and self.series[-1][0] == now:
            self.series[-1] = point
        elif not self.series or self.series[-1][1:] != point[1:]:
            self.series.append(point)

    def run(self) -> SimulationTrace:
        for job in sorted(self.jobs.values(), key=lambda j: (j.submit_time, j.job_id)):
            self._push(job.submit_time, ARRIVAL, job.job_id)
        start_time = min((j.submit_time for j in self.jobs.values()), default=0.0)
        if self.jobs:
            self._push(math.ceil(start_time / self.config.tick_s) * self.config.tick_s, TICK)
        self.series.append((start_time, 0, 0, 0))
        now = start_time
        while self._heap:
            now, kind, job_id, _, payload = heapq.heappop(self._heap)
            if kind == ARRIVAL:
                self.sched.submit(job_id, now)
                self._arrivals_left -= 1
            elif kind == TICK:
                self._on_tick(now)
            elif kind == ITERATION:
                self._on_iteration(self.runs[job_id], now, payload)
            elif kind == RECONFIG_DONE:
                self._on_reconfig_done(self.runs[job_id], now)
            else:
                self._on_done(self.runs[job_id], now)
            self._check(now)
            self._record(now)
        if self.completed != len(self.jobs):
            raise InvariantViolation(
                f"simulation ended with {len(self.jobs) - self.completed} unfinished jobs")
        end_time = max((r.end for r in self.records.values()), default=start_time)
        log.debug("simulated %d jobs, makespan %.1f s", len(self.jobs), end_time - start_time)
        return SimulationTrace(self.config.total_nodes, start_time, end_time,
                               [self.records[j] for j in sorted(self.records)],
                               self.series, self.ticks)


def run(workload: Sequence[Job], profiles: Mapping[str, ApplicationProfile],
        config: SimConfig = SimConfig(), seed: int | None = None) -> SimulationTrace:
    """Simulate ``workload`` to completion.

    The engine itself draws no random numbers; ``seed`` is accepted so
    callers can thread one through sweeps, and is otherwise unused.
    """
    return Engine(workload, profiles, config).run()

"""Per-job reconfiguration state machine.

A malleable job reaches a check point at an iteration boundary, asks the
scheduler for an action, and if one is granted spends a priced overhead
(process spawn plus data redistribution) before resuming at the new size
from the iteration where it stopped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import Busy, IncompatibleGroups, PolicyViolation
from .redistribution import RedistributionPlan, classify_resize, plan_default, transfer_cost


@dataclass(frozen=True)
class OverheadModel:
    spawn_base_s: float = 1.0
    spawn_per_proc_s: float = 0.05
    bandwidth_bytes_per_s: float = 12.5e9  # 100 Gbit/s
    latency_s: float = 5e-6
    bytes_per_element: int = 8

    @classmethod
    def zero(cls) -> "OverheadModel":
        return cls(spawn_base_s=0.0, spawn_per_proc_s=0.0, latency_s=0.0,
                   bandwidth_bytes_per_s=math.inf)


def spawn_cost(target_procs: int, base_s: float = 1.0, per_proc_s: float = 0.05) -> float:
    if target_procs < 1:
        raise ValueError("target_procs must be >= 1")
    return base_s + per_proc_s * target_procs


# -- actions -------------------------------------------------------------------

@dataclass(frozen=True)
class Expand:
    to: int
    kind = "expand"


@dataclass(frozen=True)
class Shrink:
    to: int
    kind = "shrink"


@dataclass(frozen=True)
class NoAction:
    kind = "none"


NO_ACTION = NoAction()


def normalize_action(current: int, action):
    """Collapse a resize to the current size into ``NO_ACTION``."""
    if isinstance(action, (Expand, Shrink)) and action.to == current:
        return NO_ACTION
    return action


# -- phases --------------------------------------------------------------------

@dataclass(frozen=True)
class Steady:
    pass


@dataclass(frozen=True)
class AwaitingDecision:
    pass


@dataclass(frozen=True)
class Spawning:
    target: int


@dataclass(frozen=True)
class Redistributing:
    plan: RedistributionPlan
    remaining: float


@dataclass(frozen=True)
class Resuming:
    pass


_ALLOWED = {
    Steady: (AwaitingDecision, Spawning),
    AwaitingDecision: (Steady, Spawning),
    Spawning: (Redistributing,),
    Redistributing: (Resuming,),
    Resuming: (Steady,),
}


@dataclass
class ReconfigState:
    """Reconfiguration bookkeeping owned by one running job."""

    inhibitor_period_s: float = 0.0
    inhibitor_iterations: int = 0
    last_check_time: float = 0.0
    last_check_iteration: int = 0
    phase: object = field(default_factory=Steady)

    def reset_checks(self, now: float, iteration: int) -> None:
        self.last_check_time = now
        self.last_check_iteration = iteration

    def _move(self, new_phase) -> None:
        if not isinstance(new_phase, _ALLOWED[type(self.phase)]):
            raise Busy(f"illegal transition {type(self.phase).__name__} -> "
                       f"{type(new_phase).__name__}")
        self.phase = new_phase

    @property
    def in_flight(self) -> bool:
        return isinstance(self.phase, (Spawning, Redistributing, Resuming))

    def await_decision(self, now: float, iteration: int) -> None:
        self._move(AwaitingDecision())
        self.reset_checks(now, iteration)

    def decline(self) -> None:
        self._move(Steady())

    def finish(self) -> None:
        """Redistribution done: resume computing at the new size."""
        self._move(Resuming())
        self._move(Steady())


def should_check(state: ReconfigState, now: float, iteration: int) -> bool:
    """Both inhibitors must have elapsed since the last check (inclusive)."""
    if now - state.last_check_time < state.inhibitor_period_s:
        return False
    return iteration - state.last_check_iteration >= state.inhibitor_iterations


def redistribution_plan(total_bytes: int, old_procs: int, new_procs: int,
                        bytes_per_element: int = 8) -> RedistributionPlan:
    """Default-pattern plan over a job's data, padded to an even split."""
    m = max(old_procs, new_procs)
    elements = -(-total_bytes // bytes_per_element)
    elements = -(-elements // m) * m
    return plan_default(elements, old_procs, new_procs)


def begin_resize(state: ReconfigState, current: int, action, *, lower: int, upper: int,
                 valid: list[int] | None = None, total_bytes: int = 0,
                 overhead: OverheadModel = OverheadModel()) -> tuple[Redistributing, float]:
    """Start a granted resize; returns the redistribution phase and its cost in seconds."""
    if state.in_flight:
        raise Busy("a reconfiguration is already in flight")
    action = normalize_action(current, action)
    if isinstance(action, NoAction):
        raise PolicyViolation("no resize to perform")
    target = action.to
    try:
        direction, _ = classify_resize(current, target)
    except IncompatibleGroups as exc:
        raise PolicyViolation(str(exc)) from exc
    if (direction == "expand") != isinstance(action, Expand):
        raise PolicyViolation(f"{type(action).__name__} from {current} to {target}")
    if not lower <= target <= upper:
        raise PolicyViolation(f"target {target} outside [{lower}, {upper}]")
    if valid is not None and target not in valid:
        raise PolicyViolation(f"target {target} is not a measured configuration {valid}")

    plan = redistribution_plan(total_bytes, current, target, overhead.bytes_per_element)
    cost = spawn_cost(target, overhead.spawn_base_s, overhead.spawn_per_proc_s)
    cost += transfer_cost(plan, overhead.bytes_per_element,
                          overhead.bandwidth_bytes_per_s, overhead.latency_s)
    state._move(Spawning(target))
    phase = Redistributing(plan, cost)
    state._move(phase)
    return phase, cost

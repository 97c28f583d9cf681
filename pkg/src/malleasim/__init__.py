"""Simulator for malleable and moldable jobs on a batch-scheduled cluster.

Modules: ``profiles`` (scalability curves and the gain-difference heuristic),
``redistribution`` (data movement plans between process groups),
``reconfig`` (per-job resize state machine and overhead pricing),
``scheduler`` (backfill plus the expand/shrink policy), ``workload``
(synthetic job streams), ``simulator`` and ``metrics`` (discrete-event runs
and their reports), ``config`` and ``cli``.
"""

from .errors import InputError, InvariantViolation, MalleasimError
from .profiles import (ApplicationProfile, GainCurve, MalleabilityParams,
                       derive_malleability_params, gain_difference, load_profiles)
from .simulator import SimConfig, SimulationTrace, run
from .metrics import MetricsReport, energy, speedup, summarize
from .workload import Heterogeneous, Job, JobClass, PerApp, WorkloadSpec, generate

__version__ = "0.1.0"

__all__ = [
    "ApplicationProfile", "GainCurve", "MalleabilityParams", "derive_malleability_params",
    "gain_difference", "load_profiles", "SimConfig", "SimulationTrace", "run",
    "MetricsReport", "energy", "speedup", "summarize", "Heterogeneous", "Job", "JobClass",
    "PerApp", "WorkloadSpec", "generate", "InputError", "InvariantViolation",
    "MalleasimError",
]

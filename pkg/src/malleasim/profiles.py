"""Application scalability profiles and the gain-difference heuristic.

A profile holds the completion time of one application measured at a ladder
of process counts (each a multiple of the previous one).  From those timings
``gain_difference`` computes the per-configuration improvement relative to the
smallest run, and ``derive_malleability_params`` turns that curve into the
(lower, preferred, upper) triple used by the scheduler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

from .errors import InsufficientData, InvalidProfile, UnknownConfiguration

DEFAULT_THRESHOLD_PCT = 10.0
FIXTURE_APPS = ("cg", "jacobi", "nbody", "hpg")


@dataclass(frozen=True)
class ApplicationProfile:
    name: str
    measured_timings: Mapping[int, float]
    reference_iterations: int
    bytes_per_process: int
    min_feasible_procs: int = 1
    inhibitor_period_s: float = 0.0
    inhibitor_iterations: int = 0
    # Iterations a job runs.  When ``iterations_per_worker`` is set the count
    # is instead derived from the worker ranks of the initial allocation.
    iterations: int | None = None
    iterations_per_worker: int = 0
    service_procs: int = 0

    def __post_init__(self):
        timings = {int(p): float(t) for p, t in self.measured_timings.items()}
        object.__setattr__(self, "measured_timings", dict(sorted(timings.items())))
        validate_profile(self)

    @property
    def process_counts(self) -> list[int]:
        return list(self.measured_timings)

    @property
    def smallest_procs(self) -> int:
        return next(iter(self.measured_timings))

    @property
    def total_bytes(self) -> int:
        """Data footprint of a whole job (strong scaling keeps it constant)."""
        return self.bytes_per_process * self.smallest_procs

    def job_iterations(self, initial_procs: int) -> tuple[int, int]:
        """Return ``(iterations, reference_iterations)`` for a job started on
        ``initial_procs`` nodes.

        Worker-scaled applications split a fixed dataset into
        ``workers * iterations_per_worker`` chunks, so their whole-run timings
        correspond to whatever chunk count the job ends up with.
        """
        if self.iterations_per_worker:
            workers = initial_procs - self.service_procs
            if workers < 1:
                raise UnknownConfiguration(
                    f"{self.name}: {initial_procs} procs leaves no worker ranks")
            n = workers * self.iterations_per_worker
            return n, n
        n = self.iterations if self.iterations is not None else self.reference_iterations
        return n, self.reference_iterations


def validate_profile(profile: ApplicationProfile) -> None:
    timings = profile.measured_timings
    if not timings:
        raise InvalidProfile(f"{profile.name}: measured_timings is empty")
    counts = list(timings)
    if counts[0] < 1:
        raise InvalidProfile(f"{profile.name}: measured_timings keys must be >= 1")
    for prev, cur in zip(counts, counts[1:]):
        if cur % prev:
            raise InvalidProfile(
                f"{profile.name}: measured_timings key {cur} is not a multiple of {prev}")
    for p, t in timings.items():
        if not math.isfinite(t) or t <= 0:
            raise InvalidProfile(f"{profile.name}: measured_timings[{p}] must be finite and > 0")
    if counts[0] < profile.min_feasible_procs:
        raise InvalidProfile(
            f"{profile.name}: smallest measured count {counts[0]} is below "
            f"min_feasible_procs {profile.min_feasible_procs}")
    if profile.reference_iterations < 1:
        raise InvalidProfile(f"{profile.name}: reference_iterations must be >= 1")
    if profile.bytes_per_process < 0:
        raise InvalidProfile(f"{profile.name}: bytes_per_process must be >= 0")
    if profile.inhibitor_period_s < 0:
        raise InvalidProfile(f"{profile.name}: inhibitor_period_s must be >= 0")
    if profile.inhibitor_iterations < 0:
        raise InvalidProfile(f"{profile.name}: inhibitor_iterations must be >= 0")


@dataclass(frozen=True)
class GainCurve:
    """Gain percentage per process count, excluding the reference count."""

    reference_procs: int
    entries: Mapping[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class MalleabilityParams:
    lower: int
    upper: int
    preferred: int

    def __post_init__(self):
        if not self.lower <= self.preferred <= self.upper:
            raise InvalidProfile(
                f"need lower <= preferred <= upper, got "
                f"({self.lower}, {self.preferred}, {self.upper})")

    def as_tuple(self) -> tuple[int, int, int]:
        """(lower, upper, preferred), the column order of the parameter table."""
        return self.lower, self.upper, self.preferred


def gain_difference(profile: ApplicationProfile) -> GainCurve:
    """s(p) = (t(prev) - t(p)) / t(smallest) * 100 for every measured p
    after the smallest."""
    timings = profile.measured_timings
    if len(timings) < 2:
        raise InsufficientData(
            f"{profile.name}: gain difference needs at least 2 measured points, "
            f"got {len(timings)}")
    counts = list(timings)
    t_ref = timings[counts[0]]
    entries = {
        cur: (timings[prev] - timings[cur]) / t_ref * 100.0
        for prev, cur in zip(counts, counts[1:])
    }
    return GainCurve(reference_procs=counts[0], entries=entries)


def _clamp(p: int, allowed: list[int]) -> int:
    # largest allowed count <= p; allowed is sorted and nonempty
    below = [q for q in allowed if q <= p]
    return below[-1] if below else allowed[0]


def derive_malleability_params(curve: GainCurve,
                               threshold_pct: float = DEFAULT_THRESHOLD_PCT,
                               cluster_cap: int = 32) -> MalleabilityParams:
    if not curve.entries:
        raise InsufficientData("gain curve is empty")
    if threshold_pct <= 0:
        raise ValueError("threshold_pct must be > 0")
    counts = sorted(curve.entries)
    gains = [curve.entries[p] for p in counts]

    first = next((i for i, s in enumerate(gains) if s > threshold_pct), None)
    if first is None:
        lower = preferred = curve.reference_procs
        scan_from = 0
        upper = curve.reference_procs
    else:
        lower = preferred = counts[first]
        for p, s in zip(counts[first + 1:], gains[first + 1:]):
            if s < threshold_pct:
                break
            preferred = p
        scan_from = first
        upper = lower
    for p, s in zip(counts[scan_from:], gains[scan_from:]):
        if s < 0:
            break
        upper = p

    allowed = [q for q in [curve.reference_procs, *counts] if q <= cluster_cap]
    if not allowed:
        raise InsufficientData(
            f"no measured configuration fits within cluster cap {cluster_cap}")
    lower, preferred, upper = (_clamp(v, allowed) for v in (lower, preferred, upper))
    return MalleabilityParams(lower=lower, upper=upper, preferred=preferred)


def execution_time(profile: ApplicationProfile, procs: int, iterations: int,
                   reference_iterations: int | None = None) -> float:
    """Seconds to run ``iterations`` iterations on ``procs`` nodes.

    ``reference_iterations`` overrides the profile's value for jobs whose
    measured timings describe a different iteration count (worker-scaled apps).
    """
    if procs not in profile.measured_timings:
        raise UnknownConfiguration(
            f"{profile.name}: no timing measured for {procs} processes "
            f"(measured: {profile.process_counts})")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    ref = reference_iterations or profile.reference_iterations
    return profile.measured_timings[procs] * iterations / ref


def valid_configs(profile: ApplicationProfile, params: MalleabilityParams) -> list[int]:
    """Measured process counts inside [lower, upper]."""
    return [p for p in profile.process_counts if params.lower <= p <= params.upper]


# -- loading -----------------------------------------------------------------

_REQUIRED = ("name", "measured_timings", "reference_iterations", "bytes_per_process")
_OPTIONAL_INT = ("min_feasible_procs", "inhibitor_iterations", "iterations",
                 "iterations_per_worker", "service_procs")


def profile_from_dict(doc: Mapping, source: str = "<dict>") -> ApplicationProfile:
    if not isinstance(doc, Mapping):
        raise InvalidProfile(f"{source}: expected a mapping at top level")
    for key in _REQUIRED:
        if key not in doc:
            raise InvalidProfile(f"{source}: missing field '{key}'")
    timings = doc["measured_timings"]
    if not isinstance(timings, Mapping):
        raise InvalidProfile(f"{source}: field 'measured_timings' must be a mapping")
    try:
        parsed = {int(p): float(t) for p, t in timings.items()}
    except (TypeError, ValueError) as exc:
        raise InvalidProfile(f"{source}: field 'measured_timings' has a non-numeric entry") from exc

    kwargs = {}
    for key in ("reference_iterations", "bytes_per_process", *_OPTIONAL_INT):
        if key in doc and doc[key] is not None:
            try:
                kwargs[key] = int(doc[key])
            except (TypeError, ValueError) as exc:
                raise InvalidProfile(f"{source}: field '{key}' must be an integer") from exc
    if "inhibitor_period_s" in doc:
        try:
            kwargs["inhibitor_period_s"] = float(doc["inhibitor_period_s"])
        except (TypeError, ValueError) as exc:
            raise InvalidProfile(f"{source}: field 'inhibitor_period_s' must be a number") from exc
    try:
        return ApplicationProfile(name=str(doc["name"]), measured_timings=parsed, **kwargs)
    except InvalidProfile as exc:
        raise InvalidProfile(f"{source}: {exc}") from exc


def load_profile(path: str | Path) -> ApplicationProfile:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InvalidProfile(f"{path}: not a valid YAML document ({exc})") from exc
    return profile_from_dict(doc, source=str(path))


def fixture_profile(name: str) -> ApplicationProfile:
    ref = resources.files("malleasim") / "data" / "profiles" / f"{name}.yaml"
    if not ref.is_file():
        raise InvalidProfile(f"no bundled profile named '{name}'")
    return profile_from_dict(yaml.safe_load(ref.read_text()), source=f"fixture:{name}")


def load_profiles(directory: str | Path | None = None) -> dict[str, ApplicationProfile]:
    """Load every ``*.yaml`` profile in ``directory`` (bundled fixtures by default)."""
    if directory is None:
        return {name: fixture_profile(name) for name in FIXTURE_APPS}
    out = {}
    for path in sorted(Path(directory).glob("*.yaml")):
        prof = load_profile(path)
        out[prof.name] = prof
    return out

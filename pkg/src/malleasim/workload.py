"""Synthetic workload generation and the workload text format.

Each job is drawn from a seeded ``random.Random``: an exponential
inter-arrival gap, an application picked by weight, and one uniform draw
that decides malleability in mixed workloads.  The three draws are taken for
every job whatever the class settings, so workloads that share a seed share
their base job list (same arrivals and applications) and differ only in
submission mode and malleable flags.  Mixed workloads with larger malleable
fractions are supersets of smaller ones.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import yaml

from .errors import InvalidSpec
from .profiles import (DEFAULT_THRESHOLD_PCT, ApplicationProfile, MalleabilityParams,
                       derive_malleability_params, gain_difference)

DEFAULT_ARRIVAL_MEAN_S = 10.0


class JobClass(str, enum.Enum):
    FIXED = "fixed"
    PURE_MOLDABLE = "moldable"
    PURE_MALLEABLE = "malleable"
    FLEXIBLE = "flexible"

    @property
    def rigid(self) -> bool:
        return self in (JobClass.FIXED, JobClass.PURE_MALLEABLE)

    @property
    def malleable(self) -> bool:
        return self in (JobClass.PURE_MALLEABLE, JobClass.FLEXIBLE)


def classify(job: "Job") -> JobClass:
    if job.rigid:
        return JobClass.PURE_MALLEABLE if job.malleable else JobClass.FIXED
    return JobClass.FLEXIBLE if job.malleable else JobClass.PURE_MOLDABLE


@dataclass(frozen=True)
class Job:
    job_id: int
    submit_time: float
    app: str
    rigid: bool
    malleable: bool
    lower: int
    upper: int
    preferred: int
    request: int | None = None  # node count for rigid submissions

    @property
    def job_class(self) -> JobClass:
        return classify(self)

    @property
    def params(self) -> MalleabilityParams:
        return MalleabilityParams(self.lower, self.upper, self.preferred)

    @property
    def min_nodes(self) -> int:
        return self.request if self.rigid else self.lower


@dataclass(frozen=True)
class Heterogeneous:
    """A given percentage of jobs is malleable."""

    malleable_fraction: float


@dataclass(frozen=True)
class PerApp:
    """Only jobs of the listed applications are malleable."""

    malleable_apps: frozenset[str]


@dataclass
class WorkloadSpec:
    num_jobs: int
    app_mix: Mapping[str, float]
    job_class: JobClass | Heterogeneous | PerApp = JobClass.FIXED
    # submission mode for Heterogeneous / PerApp mixes
    rigid: bool = True
    arrival_mean_s: float = DEFAULT_ARRIVAL_MEAN_S
    seed: int | None = None
    threshold_pct: float = DEFAULT_THRESHOLD_PCT
    cluster_cap: int = 32

    def validate(self) -> None:
        if self.num_jobs < 0:
            raise InvalidSpec("num_jobs must be >= 0")
        if not self.app_mix:
            raise InvalidSpec("app_mix is empty")
        if any(w < 0 for w in self.app_mix.values()):
            raise InvalidSpec("app_mix weights must be >= 0")
        if abs(sum(self.app_mix.values()) - 1.0) > 1e-9:
            raise InvalidSpec(f"app_mix weights sum to {sum(self.app_mix.values())}, not 1")
        if self.arrival_mean_s < 0:
            raise InvalidSpec("arrival_mean_s must be >= 0")
        if isinstance(self.job_class, Heterogeneous) and not 0 <= self.job_class.malleable_fraction <= 100:
            raise InvalidSpec("malleable_fraction must be within [0, 100]")
        if self.seed is None:
            raise InvalidSpec("a seed is required")


def app_params(profiles: Mapping[str, ApplicationProfile], threshold_pct: float,
               cluster_cap: int) -> dict[str, MalleabilityParams]:
    return {name: derive_malleability_params(gain_difference(p), threshold_pct, cluster_cap)
            for name, p in profiles.items()}


def _flags(spec: WorkloadSpec, app: str, u: float) -> tuple[bool, bool]:
    cls = spec.job_class
    if isinstance(cls, JobClass):
        return cls.rigid, cls.malleable
    if isinstance(cls, Heterogeneous):
        return spec.rigid, u * 100.0 < cls.malleable_fraction
    return spec.rigid, app in cls.malleable_apps


def generate(spec: WorkloadSpec, profiles: Mapping[str, ApplicationProfile]) -> list[Job]:
    spec.validate()
    missing = set(spec.app_mix) - set(profiles)
    if missing:
        raise InvalidSpec(f"no profile for application(s): {sorted(missing)}")
    if isinstance(spec.job_class, PerApp) and spec.job_class.malleable_apps - set(profiles):
        raise InvalidSpec(f"unknown malleable app(s): "
                          f"{sorted(spec.job_class.malleable_apps - set(profiles))}")
    params = app_params({a: profiles[a] for a in spec.app_mix},
                        spec.threshold_pct, spec.cluster_cap)
    apps = list(spec.app_mix)
    weights = [spec.app_mix[a] for a in apps]
    rng = random.Random(spec.seed)

    jobs = []
    t = 0.0
    for job_id in range(spec.num_jobs):
        gap = rng.expovariate(1.0 / spec.arrival_mean_s) if spec.arrival_mean_s > 0 else 0.0
        pick = rng.random()
        u = rng.random()
        if job_id:
            t += gap
        acc, app = 0.0, apps[-1]
        for name, w in zip(apps, weights):
            acc += w
            if pick < acc:
                app = name
                break
        rigid, malleable = _flags(spec, app, u)
        p = params[app]
        jobs.append(Job(job_id, t, app, rigid, malleable, p.lower, p.upper, p.preferred,
                        p.upper if rigid else None))
    return jobs


# -- text format -----------------------------------------------------------------

HEADER = "# job_id submit_time app class lower upper preferred request\n"


def format_workload(jobs: Iterable[Job]) -> str:
    """One job per line; ``request`` is ``N`` for rigid and ``lo-hi`` for
    moldable submissions, mirroring sbatch's ``-N`` argument."""
    lines = [HEADER]
    for j in jobs:
        request = str(j.request) if j.rigid else f"{j.lower}-{j.upper}"
        lines.append(f"{j.job_id} {j.submit_time!r} {j.app} {j.job_class.value} "
                     f"{j.lower} {j.upper} {j.preferred} {request}\n")
    return "".join(lines)


def parse_workload(text: str) -> list[Job]:
    jobs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 8:
            raise InvalidSpec(f"line {lineno}: expected 8 columns, got {len(fields)}")
        jid, submit, app, cls, lower, upper, preferred, request = fields
        try:
            job_class = JobClass(cls)
            lower_i, upper_i, pref_i = int(lower), int(upper), int(preferred)
            if job_class.rigid:
                req = int(request)
            else:
                lo, hi = (int(x) for x in request.split("-"))
                if (lo, hi) != (lower_i, upper_i):
                    raise InvalidSpec(f"line {lineno}: request {request} disagrees with limits")
                req = None
            job = Job(int(jid), float(submit), app, job_class.rigid, job_class.malleable,
                      lower_i, upper_i, pref_i, req)
        except ValueError as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(f"line {lineno}: {exc}") from exc
        jobs.append(job)
    return jobs


def write_workload(jobs: Iterable[Job], path: str | Path) -> None:
    Path(path).write_text(format_workload(jobs))


def read_workload(path: str | Path) -> list[Job]:
    return parse_workload(Path(path).read_text())


# -- spec files ------------------------------------------------------------------

def spec_from_dict(doc: Mapping, seed: int | None = None) -> WorkloadSpec:
    """Build a spec from a parsed YAML document.

    ``job_class`` is one of the class names, or a mapping with either
    ``malleable_fraction`` or ``malleable_apps``; ``submission`` (rigid or
    moldable) applies to those mixes.
    """
    if not isinstance(doc, Mapping):
        raise InvalidSpec("workload spec must be a mapping")
    try:
        num_jobs = int(doc["num_jobs"])
    except KeyError as exc:
        raise InvalidSpec("workload spec: missing field 'num_jobs'") from exc
    app_mix = doc.get("app_mix")
    if app_mix is None:
        raise InvalidSpec("workload spec: missing field 'app_mix'")
    if isinstance(app_mix, list):
        app_mix = {a: 1.0 / len(app_mix) for a in app_mix} if app_mix else {}
    job_class = parse_job_class(doc.get("job_class", "fixed"))
    submission = doc.get("submission", "rigid")
    if submission not in ("rigid", "moldable"):
        raise InvalidSpec(f"workload spec: submission must be rigid or moldable, got {submission!r}")
    return WorkloadSpec(
        num_jobs=num_jobs,
        app_mix={str(k): float(v) for k, v in app_mix.items()},
        job_class=job_class,
        rigid=submission == "rigid",
        arrival_mean_s=float(doc.get("arrival_mean_s", DEFAULT_ARRIVAL_MEAN_S)),
        seed=seed if seed is not None else doc.get("seed"),
        threshold_pct=float(doc.get("threshold_pct", DEFAULT_THRESHOLD_PCT)),
        cluster_cap=int(doc.get("cluster_cap", 32)),
    )


def parse_job_class(value) -> JobClass | Heterogeneous | PerApp:
    if isinstance(value, Mapping):
        if "malleable_fraction" in value:
            return Heterogeneous(float(value["malleable_fraction"]))
        if "malleable_apps" in value:
            return PerApp(frozenset(value["malleable_apps"]))
        raise InvalidSpec(f"workload spec: unrecognised job_class mapping {dict(value)}")
    try:
        return JobClass(str(value))
    except ValueError as exc:
        raise InvalidSpec(f"workload spec: unknown job_class {value!r}") from exc


def load_spec(path: str | Path, seed: int | None = None) -> WorkloadSpec:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise InvalidSpec(f"{path}: not a valid YAML document ({exc})") from exc
    return spec_from_dict(doc, seed)

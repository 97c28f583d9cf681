"""Metrics derived from a simulation trace and their CSV forms.

CSV schemas (all files have a header row, ``\\n`` line endings, and floats
printed with 6 decimals):

``trace.csv``   job_id,app,class,submit,start,end,waiting,execution,completion,resizes
``series.csv``  t,allocated_nodes,running_jobs,completed_jobs
                (step function: each row holds from ``t`` until the next row)
``metrics.csv`` scope,metric,value
                scope is ``all`` or an application name
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean

from .errors import IncomparableRuns
from .simulator import SimulationTrace

IDLE_W = 100.0
LOADED_W = 340.0

TRACE_COLUMNS = ["job_id", "app", "class", "submit", "start", "end",
                 "waiting", "execution", "completion", "resizes"]
SERIES_COLUMNS = ["t", "allocated_nodes", "running_jobs", "completed_jobs"]
SUMMARY_COLUMNS = ["scope", "metric", "value"]


@dataclass(frozen=True)
class JobMetrics:
    job_id: int
    app: str
    job_class: str
    submit: float
    start: float
    end: float
    waiting: float
    execution: float
    completion: float
    resizes: int


@dataclass
class MetricsReport:
    jobs: list[JobMetrics]
    makespan: float
    avg_waiting: float
    avg_execution: float
    avg_completion: float
    per_app: dict[str, dict[str, float]]
    allocation_rate: float
    energy_kwh: float
    total_resizes: int
    throughput: list[tuple[float, int]] = field(default_factory=list)

    def metric(self, name: str) -> float:
        return {"waiting": self.avg_waiting, "execution": self.avg_execution,
                "completion": self.avg_completion, "makespan": self.makespan}[name]


def _segments(trace: SimulationTrace):
    """Yield (dt, allocated) pieces of the allocation step function over the
    trace horizon."""
    series = trace.series
    for i, (t, alloc, _, _) in enumerate(series):
        if t >= trace.end_time:
            break
        nxt = series[i + 1][0] if i + 1 < len(series) else trace.end_time
        nxt = min(nxt, trace.end_time)
        if nxt > t:
            yield nxt - t, alloc


def allocated_node_seconds(trace: SimulationTrace) -> float:
    return sum(dt * alloc for dt, alloc in _segments(trace))


def allocation_rate(trace: SimulationTrace) -> float:
    """Allocated node-time over total node-time of the makespan, in percent."""
    if trace.makespan <= 0:
        return 0.0
    return allocated_node_seconds(trace) / (trace.total_nodes * trace.makespan) * 100.0


def energy(trace: SimulationTrace, idle_w: float = IDLE_W, loaded_w: float = LOADED_W) -> float:
    """kWh consumed over the trace horizon; a node draws ``loaded_w`` while
    allocated to a job and ``idle_w`` otherwise."""
    if idle_w < 0 or loaded_w < 0:
        raise ValueError("wattages must be >= 0")
    wh = 0.0
    covered = 0.0
    for dt, alloc in _segments(trace):
        wh += (alloc * loaded_w + (trace.total_nodes - alloc) * idle_w) * dt / 3600.0
        covered += dt
    # horizon not covered by the series counts as idle
    rest = trace.makespan - covered
    if rest > 0:
        wh += trace.total_nodes * idle_w * rest / 3600.0
    return wh / 1000.0


def summarize(trace: SimulationTrace, idle_w: float = IDLE_W,
              loaded_w: float = LOADED_W) -> MetricsReport:
    rows = []
    for r in trace.jobs:
        waiting = r.start - r.submit
        execution = r.end - r.start
        rows.append(JobMetrics(r.job_id, r.app, r.job_class, r.submit, r.start, r.end,
                               waiting, execution, waiting + execution, len(r.resizes)))
    per_app: dict[str, dict[str, float]] = {}
    for app in sorted({m.app for m in rows}):
        sel = [m for m in rows if m.app == app]
        per_app[app] = {"jobs": len(sel),
                        "waiting": fmean(m.waiting for m in sel),
                        "execution": fmean(m.execution for m in sel),
                        "completion": fmean(m.completion for m in sel)}

    def avg(attr):
        return fmean(getattr(m, attr) for m in rows) if rows else 0.0

    return MetricsReport(
        jobs=rows,
        makespan=trace.makespan,
        avg_waiting=avg("waiting"),
        avg_execution=avg("execution"),
        avg_completion=avg("completion"),
        per_app=per_app,
        allocation_rate=allocation_rate(trace),
        energy_kwh=energy(trace, idle_w, loaded_w),
        total_resizes=sum(m.resizes for m in rows),
        throughput=[(t, done) for t, _, _, done in trace.series],
    )


SPEEDUP_METRICS = ("waiting", "execution", "completion", "makespan")


def speedup(baseline: MetricsReport, candidate: MetricsReport) -> dict[str, float]:
    """metric(baseline) / metric(candidate) for each averaged metric.

    Both reports must cover the same jobs (ids and applications).
    """
    key_a = [(m.job_id, m.app) for m in baseline.jobs]
    key_b = [(m.job_id, m.app) for m in candidate.jobs]
    if key_a != key_b:
        raise IncomparableRuns("reports cover different job sets")
    out = {}
    for name in SPEEDUP_METRICS:
        a, b = baseline.metric(name), candidate.metric(name)
        out[name] = 1.0 if a == b else (a / b if b else float("inf"))
    return out


# -- CSV -------------------------------------------------------------------------

def fmt(x: float) -> str:
    return f"{x:.6f}"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trace_csv(report: MetricsReport) -> str:
    return _csv(([m.job_id, m.app, m.job_class, fmt(m.submit), fmt(m.start), fmt(m.end),
                  fmt(m.waiting), fmt(m.execution), fmt(m.completion), m.resizes]
                 for m in report.jobs), TRACE_COLUMNS)


def series_csv(trace: SimulationTrace) -> str:
    if not trace.jobs:
        return _csv([], SERIES_COLUMNS)
    return _csv(([fmt(t), a, r, c] for t, a, r, c in trace.series), SERIES_COLUMNS)


def summary_rows(report: MetricsReport) -> list[tuple[str, str, str]]:
    rows = [("all", "jobs", str(len(report.jobs))),
            ("all", "makespan_s", fmt(report.makespan)),
            ("all", "avg_waiting_s", fmt(report.avg_waiting)),
            ("all", "avg_execution_s", fmt(report.avg_execution)),
            ("all", "avg_completion_s", fmt(report.avg_completion)),
            ("all", "allocation_rate_pct", fmt(report.allocation_rate)),
            ("all", "energy_kwh", fmt(report.energy_kwh)),
            ("all", "resizes", str(report.total_resizes))]
    for app, vals in report.per_app.items():
        rows.append((app, "jobs", str(vals["jobs"])))
        for name in ("waiting", "execution", "completion"):
            rows.append((app, f"avg_{name}_s", fmt(vals[name])))
    return rows


def summary_csv(report: MetricsReport) -> str:
    return _csv(summary_rows(report), SUMMARY_COLUMNS)


def write_outputs(trace: SimulationTrace, report: MetricsReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace_csv(report))
    (out / "series.csv").write_text(series_csv(trace))
    (out / "metrics.csv").write_text(summary_csv(report))

import pytest
from hypothesis import given, strategies as st

from malleasim.errors import IncomparableRuns
from malleasim.metrics import (allocation_rate, energy, series_csv, speedup, summarize,
                               summary_csv, trace_csv)
from malleasim.simulator import JobRecord, SimulationTrace


def trace_of(series, end, total=128, jobs=()):
    return SimulationTrace(total, 0.0, end, list(jobs), list(series))


def rec(job_id, app, submit, start, end):
    return JobRecord(job_id, app, "fixed", submit, start, end)


@pytest.mark.parametrize("series, end, total, kwh", [
    ([(0.0, 0, 0, 0)], 3600.0, 128, 12.8),
    ([(0.0, 64, 1, 0)], 3600.0, 128, 28.16),
    ([(0.0, 128, 1, 0)], 3600.0, 128, 43.52),
    ([(0.0, 0, 0, 0)], 0.0, 128, 0.0),
    ([(0.0, 4, 1, 0), (1800.0, 0, 0, 1)], 3600.0, 4, (4 * 340 + 4 * 100) / 2 / 1000),
])
def test_energy(series, end, total, kwh):
    assert energy(trace_of(series, end, total)) == pytest.approx(kwh, rel=1e-12)


def test_all_idle_hour_is_exact():
    assert energy(trace_of([(0.0, 0, 0, 0)], 3600.0)) == 12.8


def test_energy_rejects_negative_wattage():
    with pytest.raises(ValueError):
        energy(trace_of([(0.0, 0, 0, 0)], 10.0), idle_w=-1)


@given(st.lists(st.tuples(st.floats(0.1, 100.0), st.integers(0, 16)), min_size=1, max_size=8),
       st.floats(0, 500), st.floats(0, 500), st.floats(0, 100))
def test_energy_monotone_in_wattages(steps, idle, loaded, bump):
    t, series = 0.0, []
    for dt, alloc in steps:
        series.append((t, alloc, 0, 0))
        t += dt
    tr = trace_of(series, t, total=16)
    base = energy(tr, idle, loaded)
    assert energy(tr, idle + bump, loaded) >= base - 1e-9
    assert energy(tr, idle, loaded + bump) >= base - 1e-9
    assert 0.0 <= allocation_rate(tr) <= 100.0 + 1e-9


@pytest.mark.parametrize("series, rate", [
    ([(0.0, 128, 1, 0)], 100.0),
    ([(0.0, 64, 1, 0)], 50.0),
    ([(0.0, 128, 1, 0), (50.0, 0, 0, 1)], 50.0),
])
def test_allocation_rate(series, rate):
    assert allocation_rate(trace_of(series, 100.0)) == pytest.approx(rate)


def test_summary_per_job_identity():
    jobs = [rec(0, "cg", 0.0, 10.0, 170.0), rec(1, "nbody", 5.0, 170.0, 850.0)]
    report = summarize(trace_of([(0.0, 32, 1, 0)], 850.0, jobs=jobs))
    assert [(m.waiting, m.execution, m.completion) for m in report.jobs] == \
        [(10.0, 160.0, 170.0), (165.0, 680.0, 845.0)]
    assert report.avg_completion == 507.5
    assert report.per_app["nbody"]["waiting"] == 165.0


def test_speedup():
    base = summarize(trace_of([(0.0, 32, 1, 0)], 400.0, jobs=[rec(0, "cg", 0.0, 200.0, 400.0)]))
    fast = summarize(trace_of([(0.0, 32, 1, 0)], 200.0, jobs=[rec(0, "cg", 0.0, 100.0, 200.0)]))
    assert speedup(base, base) == {"waiting": 1.0, "execution": 1.0, "completion": 1.0,
                                   "makespan": 1.0}
    assert speedup(base, fast)["completion"] == 2.0
    other = summarize(trace_of([], 1.0, jobs=[rec(0, "jacobi", 0.0, 0.0, 1.0)]))
    with pytest.raises(IncomparableRuns):
        speedup(base, other)


def test_csv_golden():
    jobs = [rec(0, "cg", 0.0, 10.0, 170.0)]
    tr = trace_of([(0.0, 0, 0, 0), (10.0, 32, 1, 0), (170.0, 0, 0, 1)], 170.0, jobs=jobs)
    report = summarize(tr)
    assert trace_csv(report) == (
        "job_id,app,class,submit,start,end,waiting,execution,completion,resizes\n"
        "0,cg,fixed,0.000000,10.000000,170.000000,10.000000,160.000000,170.000000,0\n")
    assert series_csv(tr) == ("t,allocated_nodes,running_jobs,completed_jobs\n"
                              "0.000000,0,0,0\n10.000000,32,1,0\n170.000000,0,0,1\n")
    lines = summary_csv(report).splitlines()
    assert lines[0] == "scope,metric,value"
    assert "all,allocation_rate_pct,23.529412" in lines
    assert "cg,avg_completion_s,170.000000" in lines


def test_empty_report_csvs_are_header_only():
    report = summarize(trace_of([(0.0, 0, 0, 0)], 0.0))
    assert trace_csv(report).count("\n") == 1
    assert series_csv(trace_of([(0.0, 0, 0, 0)], 0.0)).count("\n") == 1
    assert "all,makespan_s,0.000000" in summary_csv(report)

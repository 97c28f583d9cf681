import pytest
from conftest import make_job

from malleasim.errors import InvariantViolation
from malleasim.reconfig import NO_ACTION, Expand, Shrink
from malleasim.scheduler import (ClusterState, JobQueue, Scheduler, expansion_target,
                                 initial_allocation)


def sched(total, jobs, profiles, running=()):
    s = Scheduler(total, {j.job_id: j for j in jobs}, profiles)
    for job_id, n in running:
        s.cluster.allocate(job_id, n)
    return s


@pytest.mark.parametrize("job, free, expected", [
    (make_job(1, "cg", request=32), 31, None),
    (make_job(1, "cg", request=32), 32, 32),
    (make_job(1, "cg", rigid=False), 13, 8),
    (make_job(1, "cg", rigid=False), 1, None),
    (make_job(1, "hpg", rigid=False, lower=6, upper=12, preferred=6), 5, None),
    (make_job(1, "hpg", rigid=False, lower=6, upper=12, preferred=6), 11, 6),
])
def test_initial_allocation(job, free, expected, profiles):
    assert initial_allocation(job, free, profiles[job.app]) == expected


def test_empty_queue_starts_nothing(profiles):
    assert sched(8, [], profiles).schedule_pass(0.0) == []


def test_backfill_past_blocked_head(profiles):
    jobs = [make_job(0, "cg", request=16), make_job(1, "cg", request=32),
            make_job(2, "jacobi", request=16)]
    s = sched(32, jobs, profiles, running=[(0, 16)])
    s.submit(1, 0.0)
    s.submit(2, 1.0)
    assert s.schedule_pass(10.0) == [(2, 16)]
    assert 1 in s.queue and s.cluster.free_nodes == 0


def test_moldable_jobs_take_largest_fits_in_order(profiles):
    jobs = [make_job(0, "cg", request=26), make_job(1, "cg", rigid=False),
            make_job(2, "jacobi", rigid=False)]
    s = sched(32, jobs, profiles, running=[(0, 26)])
    s.submit(1, 0.0)
    s.submit(2, 0.5)
    assert s.schedule_pass(10.0) == [(1, 4), (2, 2)]


@pytest.mark.parametrize("current, valid, upper, budget, expected", [
    (4, [2, 4, 8, 16, 32], 32, 20, 16),
    (4, [2, 4, 8, 16, 32], 32, 28, 32),
    (4, [2, 4, 8, 16, 32], 16, 28, 16),
    (4, [2, 4, 8, 16, 32], 32, 3, None),
    (6, [6, 12, 24], 12, 100, 12),
    (3, [3, 6, 12], 12, 9, 12),
])
def test_expansion_target(current, valid, upper, budget, expected):
    assert expansion_target(current, valid, upper, budget) == expected


def test_grow_towards_preferred(profiles):
    job = make_job(0, "cg", rigid=False, malleable=True)
    s = sched(24, [job], profiles, running=[(0, 4)])
    d = s.resize_decision(0, 4)
    assert (d.action, d.branch) == (Expand(16), 1)


def test_shrink_to_preferred_for_pending_job(profiles):
    job = make_job(0, "cg", rigid=False, malleable=True)
    pending = make_job(1, "hpg", lower=6, upper=12, preferred=6, request=12)
    s = sched(32, [job, pending], profiles, running=[(0, 32)])
    s.submit(1, 0.0)
    d = s.resize_decision(0, 32)
    assert (d.action, d.branch, d.promoted) == (Shrink(16), 2, 1)
    assert s.cluster.reservations == {1: 12}
    # the reserved job starts as soon as the shrink hands the nodes back
    s.cluster.release(0, 16)
    assert s.schedule_pass(10.0) == [(1, 12)]
    assert s.cluster.reservations == {}


def test_idle_at_preferred_does_nothing(profiles):
    job = make_job(0, "cg", rigid=False, malleable=True)
    s = sched(16, [job], profiles, running=[(0, 16)])
    assert s.resize_decision(0, 16).action is NO_ACTION


def test_branch_one_wins_over_shrink_opportunity(profiles):
    # below preferred with a blocked pending job: grow, never shrink
    job = make_job(0, "cg", rigid=False, malleable=True)
    blocked = make_job(1, "jacobi", request=32)
    s = sched(14, [job, blocked], profiles, running=[(0, 4)])
    s.submit(1, 0.0)
    d = s.resize_decision(0, 4)
    assert (d.action, d.branch, d.promoted) == (Expand(8), 1, None)
    assert s.cluster.reservations == {}


def test_growth_with_pending_keeps_nodes_for_blocked_head(profiles):
    job = make_job(0, "cg", rigid=False, malleable=True, preferred=8)
    blocked = make_job(1, "jacobi", request=32)
    s = sched(28, [job, blocked], profiles, running=[(0, 8)])
    s.submit(1, 0.0)
    # 20 free would allow 8 -> 16, but the blocked head is waiting for them
    d = s.resize_decision(0, 8)
    assert (d.action, d.branch) == (NO_ACTION, 0)


def test_growth_with_pending_leaves_room_for_startable_jobs(profiles):
    job = make_job(0, "cg", rigid=False, malleable=True, preferred=8)
    small = make_job(1, "jacobi", request=12)
    s = sched(36, [job, small], profiles, running=[(0, 8)])
    s.submit(1, 0.0)
    # 28 free, 12 go to the pending job at the next pass
    d = s.resize_decision(0, 8)
    assert (d.action, d.branch) == (Expand(16), 3)


def test_growth_when_queue_is_empty(profiles):
    job = make_job(0, "cg", rigid=False, malleable=True)
    s = sched(128, [job], profiles, running=[(0, 16)])
    d = s.resize_decision(0, 16)
    assert (d.action, d.branch) == (Expand(32), 4)


def test_no_shrink_to_non_divisor(profiles):
    job = make_job(0, "hpg", rigid=False, malleable=True, lower=6, upper=24, preferred=6)
    pending = make_job(1, "cg", request=4)
    s = sched(24, [job, pending], profiles, running=[(0, 24)])
    s.submit(1, 0.0)
    assert s.resize_decision(0, 24).action == Shrink(6)
    job = make_job(0, "cg", rigid=False, malleable=True, lower=2, upper=32, preferred=12)
    s = sched(32, [job, pending], profiles, running=[(0, 32)])
    s.submit(1, 0.0)
    assert s.resize_decision(0, 32).action is NO_ACTION


def test_queue_order_and_promotion():
    q = JobQueue()
    for jid, t in [(3, 0.0), (1, 0.0), (2, -1.0), (4, 5.0)]:
        q.push(jid, t)
    assert q.ids() == [2, 1, 3, 4]
    q.promote(4)
    q.promote(1)
    assert q.ids() == [4, 1, 2, 3]
    q.remove(4)
    assert q.ids() == [1, 2, 3] and len(q) == 3 and 4 not in q


def test_promoted_jobs_do_not_block_each_other(profiles):
    jobs = [make_job(i, "cg", request=32) for i in range(3)]
    jobs += [make_job(10, "nbody", request=32), make_job(11, "nbody", request=32)]
    s = sched(128, jobs, profiles, running=[(0, 32), (1, 32), (2, 32)])
    s.submit(10, 0.0)
    s.submit(11, 0.0)
    s.queue.promote(10)
    s.queue.promote(11)
    s.cluster.reservations.update({10: 32, 11: 32})
    s.cluster.release(0, 16)
    # 48 free: the first promotion starts, the second keeps waiting
    assert s.schedule_pass(10.0) == [(10, 32)]


def test_cluster_state_invariants():
    c = ClusterState(8)
    c.allocate(1, 5)
    with pytest.raises(InvariantViolation):
        c.allocate(2, 4)
    with pytest.raises(InvariantViolation):
        c.release(1, 6)
    c.release(1, 2)
    assert (c.free_nodes, c.allocations) == (5, {1: 3})
    c.allocations[1] = 7
    with pytest.raises(InvariantViolation):
        c.check()

import pytest

from malleasim.errors import Busy, PolicyViolation
from malleasim.reconfig import (NO_ACTION, AwaitingDecision, Expand, OverheadModel,
                                ReconfigState, Redistributing, Shrink, Spawning, Steady,
                                begin_resize, normalize_action, redistribution_plan,
                                should_check, spawn_cost)
from malleasim.redistribution import Transfer


@pytest.mark.parametrize("period, iters, last_t, last_k, now, k, expected", [
    (10, 0, 5, 0, 12, 1, False),
    (0, 0, 0, 0, 0, 0, True),
    (10, 0, 0, 0, 10, 1, True),
    (0, 5, 0, 10, 100, 14, False),
    (0, 5, 0, 10, 100, 15, True),
    (10, 5, 0, 0, 10, 4, False),
])
def test_should_check(period, iters, last_t, last_k, now, k, expected):
    state = ReconfigState(period, iters, last_t, last_k)
    assert should_check(state, now, k) is expected


@pytest.mark.parametrize("target, base, per, expected", [
    (1, 1.0, 0.05, 1.05), (32, 1.0, 0.05, 2.6), (17, 0.0, 0.0, 0.0),
])
def test_spawn_cost(target, base, per, expected):
    assert spawn_cost(target, base, per) == pytest.approx(expected)


def test_spawn_cost_rejects_empty_group():
    with pytest.raises(ValueError):
        spawn_cost(0)


def test_expand_five_to_ten_builds_pair_plan():
    state = ReconfigState()
    phase, cost = begin_resize(state, 5, Expand(10), lower=1, upper=32,
                               total_bytes=80, overhead=OverheadModel.zero())
    assert isinstance(phase, Redistributing)
    assert phase.plan.factor == 2
    assert phase.plan.transfers[:2] == (Transfer(0, 0, 0, 1), Transfer(0, 1, 1, 1))
    assert cost == 0.0
    assert state.in_flight


def test_shrink_eight_to_two_factor_four():
    phase, _ = begin_resize(ReconfigState(), 8, Shrink(2), lower=1, upper=8, total_bytes=64 * 8)
    assert phase.plan.direction == "shrink" and phase.plan.factor == 4
    assert {t.src_rank for t in phase.plan.transfers if t.dst_rank == 1} == {4, 5, 6, 7}


def test_cost_is_spawn_plus_transfer():
    over = OverheadModel(spawn_base_s=1.0, spawn_per_proc_s=0.05,
                         bandwidth_bytes_per_s=1000.0, latency_s=0.25, bytes_per_element=8)
    # 2 -> 4 over 64 elements: ranks 0->1 and 1->2,3 move 16 elements each
    _, cost = begin_resize(ReconfigState(), 2, Expand(4), lower=1, upper=4,
                           total_bytes=64 * 8, overhead=over)
    remote = 3
    assert cost == pytest.approx(1.0 + 0.05 * 4 + 0.25 * remote + remote * 16 * 8 / 1000.0)


def test_same_size_resize_is_no_action():
    assert normalize_action(4, Shrink(4)) is NO_ACTION
    with pytest.raises(PolicyViolation):
        begin_resize(ReconfigState(), 4, Shrink(4), lower=1, upper=8)


@pytest.mark.parametrize("current, action", [
    (4, Expand(64)), (4, Shrink(1)), (4, Expand(2)), (4, Shrink(8)), (4, Expand(6)),
])
def test_policy_violations(current, action):
    with pytest.raises(PolicyViolation):
        begin_resize(ReconfigState(), current, action, lower=2, upper=32)


def test_target_must_be_measured():
    with pytest.raises(PolicyViolation, match="measured"):
        begin_resize(ReconfigState(), 2, Expand(8), lower=2, upper=32, valid=[2, 4, 16])


def test_busy_while_in_flight():
    state = ReconfigState()
    begin_resize(state, 2, Expand(4), lower=1, upper=8)
    with pytest.raises(Busy):
        begin_resize(state, 4, Expand(8), lower=1, upper=8)
    state.finish()
    assert isinstance(state.phase, Steady)
    begin_resize(state, 4, Expand(8), lower=1, upper=8)


def test_phase_walk():
    state = ReconfigState()
    state.await_decision(3.0, 7)
    assert isinstance(state.phase, AwaitingDecision)
    assert (state.last_check_time, state.last_check_iteration) == (3.0, 7)
    state.decline()
    assert isinstance(state.phase, Steady)
    with pytest.raises(Busy):
        state.finish()
    state._move(Spawning(4))
    with pytest.raises(Busy):
        state.decline()


def test_plan_padding_covers_footprint():
    plan = redistribution_plan(100, 3, 6, bytes_per_element=8)
    assert plan.total_elements == 18  # 13 elements padded to a multiple of 6

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import escalation_violations
from hiernav.agent import TERMINATIONS, AgentConfig, Episode, run_episode
from hiernav.backend import ACTIONS, scripted_policy
from hiernav.world import DynamicObstacle, generate_scenario


def _status(**kw):
    S = {"explored": True, "mapped": True, "plan_valid": True, "at_goal": False, "local_blocked": False,
         "segment_timeout": False, "visit_trigger": False, "conflict_cells": 0, "plan_failed": False,
         "local_ready": True, "replans_global": 0, "max_global_replans": 3}
    S.update(kw)
    return S


# ------------------------------------------------------------ policy table

def test_policy_explores_without_map():
    assert scripted_policy(_status(explored=False, mapped=False, plan_valid=False)) == "ExploreStep"
    assert scripted_policy(_status(mapped=False, plan_valid=False)) == "BuildMap"
    assert scripted_policy(_status(plan_valid=False)) == "PlanGlobal"


def test_policy_conflict_replans_locally():
    assert scripted_policy(_status(conflict_cells=4)) == "ReplanLocal"


def test_policy_escalation():
    assert scripted_policy(_status(local_blocked=True, replans_global=1)) == "ReplanGlobal"
    assert scripted_policy(_status(segment_timeout=True, replans_global=3)) == "ReportError"
    assert scripted_policy(_status(replans_global=4)) == "ReportError"


def test_policy_stop_and_step():
    assert scripted_policy(_status(at_goal=True)) == "Stop"
    assert scripted_policy(_status(local_ready=False)) == "PlanLocal"
    assert scripted_policy(_status()) == "ExecuteStep"


@settings(max_examples=200)
@given(st.fixed_dictionaries({k: st.booleans() for k in (
    "explored", "mapped", "plan_valid", "at_goal", "local_blocked", "segment_timeout", "visit_trigger",
    "plan_failed", "local_ready")}), st.integers(0, 5), st.integers(0, 6))
def test_policy_total(flags, conflicts, replans):
    a = scripted_policy(_status(**flags, conflict_cells=conflicts, replans_global=replans))
    assert a in ACTIONS


# ----------------------------------------------------------------- episodes

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fixture_arrives(fx3r, seed):
    res = run_episode(fx3r, 0, AgentConfig(seed=seed))
    assert res.termination == "Arrived" and res.success
    assert 9.0 <= res.path_length_m <= 10.8
    assert res.trace[-1] == {"t": res.trace[-1]["t"], "event": "terminate", "code": "Arrived", "success": True}


@pytest.mark.parametrize("task", [2, 3])
def test_fixture_image_and_position_goals(fx3r, task):
    res = run_episode(fx3r, task, AgentConfig())
    assert res.termination == "Arrived"
    assert math.dist(res.trajectory[-1], (10.0, 2.0)) <= 1.2


def test_absent_target_not_found(fx3r):
    res = run_episode(fx3r, 1, AgentConfig())
    assert res.termination == "NotFound" and not res.success
    assert res.path_length_m == pytest.approx(0.0, abs=1e-12)


def test_blocked_only_door_unreachable(fx3r):
    fx3r.dynamic_obstacles = [DynamicObstacle((7.5, 1.0, 8.5, 3.0), True)]
    res = run_episode(fx3r, 0, AgentConfig())
    assert res.termination == "Unreachable"
    assert res.replans["global"] <= 3
    assert escalation_violations(res.trace) == []
    assert res.collisions == 0


def test_termination_and_counters(fx3r):
    fx3r.dynamic_obstacles = [DynamicObstacle((5.6, 1.6, 6.1, 2.1), True)]
    res = run_episode(fx3r, 0, AgentConfig())
    terms = [ev for ev in res.trace if ev["event"] == "terminate"]
    assert len(terms) == 1 and res.trace[-1] is terms[0]
    assert res.termination in TERMINATIONS
    assert res.replans["local"] == sum(ev["event"] == "replan_local" for ev in res.trace)
    assert res.replans["global"] == sum(ev["event"] == "replan_global" for ev in res.trace)
    assert res.success == (res.termination == "Arrived")


def test_obstacle_on_route_is_avoided(fx3r):
    fx3r.dynamic_obstacles = [DynamicObstacle((5.75, 1.75, 6.25, 2.25), True)]
    res = run_episode(fx3r, 0, AgentConfig())
    assert res.success
    assert any(ev["event"] == "conflict" for ev in res.trace)
    assert res.replans["global"] == 0


def test_episode_determinism():
    s = generate_scenario(6, seed=3)
    a = run_episode(s, 4, AgentConfig(seed=2))
    b = run_episode(s, 4, AgentConfig(seed=2))
    assert json.dumps(a.trace) == json.dumps(b.trace)


def test_no_global_has_no_global_plan(fx3r):
    res = run_episode(fx3r, 0, AgentConfig(no_global=True))
    assert not any(ev["event"] == "global_plan" for ev in res.trace)


def test_no_local_straight_legs(fx3r):
    res = run_episode(fx3r, 0, AgentConfig(no_local=True))
    assert res.success
    for ev in res.trace:
        if ev["event"] == "local_plan":
            assert len(ev["waypoints"]) == 1


def test_wall_follow_mapping_then_arrival(fx3r):
    res = run_episode(fx3r, 0, AgentConfig(explore="wallfollow"))
    assert res.success
    ex = next(ev for ev in res.trace if ev["event"] == "explore")
    assert ex["mode"] == "wallfollow" and ex["coverage"] >= 0.9
    assert res.explore_time_s > 0


def test_local_segments_start_at_arrival(fx3r):
    """A segment's dense waypoints are only produced once the robot is within
    the arrival radius of the previous sparse waypoint."""
    res = run_episode(fx3r, 0, AgentConfig())
    gp = next(ev for ev in res.trace if ev["event"] == "global_plan")
    sparse = gp["waypoints"]
    pos = list(res.trajectory[0])
    seen = set()
    for ev in res.trace:
        if ev["event"] == "pose":
            pos = ev["position"]
        elif ev["event"] == "local_plan" and ev["segment"] not in seen:
            seen.add(ev["segment"])
            k = ev["segment"]
            if k > 0:
                assert math.dist(pos, sparse[k - 1]) <= 0.5 + 1e-9
    assert seen == set(range(len(sparse) + 1))


def test_request_context(fx3r):
    ep = Episode(fx3r, 0, AgentConfig())
    ep.do_ExploreStep()
    ep.do_BuildMap()
    for i in range(80):
        ep.poses.append((i * 0.1, 1.0, 2.0, 0.0))
    req = json.loads(ep.request(ep.status()))
    assert list(req) == ["B", "I", "M", "P", "T", "S", "O"]
    assert len(req["M"]["graph"]["vertices"]) == 5
    assert "chair" in req["M"]["labels"]
    assert len(req["T"]) == 50
    assert req["O"] == list(ACTIONS)
    assert req["I"] == {"kind": "text", "target_label": "chair", "region_label": "kitchen"}


def test_task_index_out_of_range(fx3r):
    with pytest.raises(IndexError):
        Episode(fx3r, 9)


@pytest.mark.parametrize("seed", range(6))
def test_generated_clean_runs(seed):
    s = generate_scenario(5 + seed % 5, seed=200 + seed)
    res = run_episode(s, len(s.tasks) - 1, AgentConfig(record_poses=False))
    assert res.success
    assert res.collisions == 0
    assert escalation_violations(res.trace) == []

"""Navigation agent: status assembly, action dispatch, execution and replan
escalation for one episode."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .backend import ACTIONS, BACKGROUND, ScriptedBackend, encode_context, make_backend
from .explore import ORACLE, ExplorationFailed, explore, wall_follow_route
from .global_plan import TargetNotFound, Unreachable, plan_global, resolve_goal, sample_free_points
from .local_plan import (LocalBlocked, build_local_costmap, detect_conflict, greedy_window_target, plan_local,
                         project_waypoint)
from .semantic import Instruction
from .topo import TopoGraph, build_topo_graph, graph_to_dict, penalize_edge, segment_regions
from .world import FREE, OCCUPIED, Pose, RobotState, Scenario, rasterize, simulate_depth, step_robot

log = logging.getLogger(__name__)

TERMINATIONS = ("Arrived", "ErrorReport", "Timeout", "Unreachable", "NotFound")


@dataclass
class AgentConfig:
    explore: str = ORACLE
    no_global: bool = False
    no_local: bool = False
    seed: int = 0
    success_radius_m: float = 1.0
    arrival_radius_m: float = 0.5
    stop_tolerance_m: float = 0.02
    segment_timeout_s: float = 60.0
    visit_limit: int = 3
    max_global_replans: int = 3
    step_budget: int = 20000
    dt_s: float = 1 / 15
    scan_every: int = 5
    scan_memory: int = 8
    sample_density: float = 4.0
    conflict_lookahead_m: float = 2.0
    conflict_margin_m: float = 0.5
    heading_tolerance_rad: float = 0.15
    door_approach_m: float = 0.6
    field_dim: int = 64
    field_seed: int = 42
    backend: str | None = None
    backend_timeout_s: float = 10.0
    record_poses: bool = True


@dataclass
class EpisodeResult:
    success: bool
    termination: str
    path_length_m: float
    sim_time_s: float
    replans: dict
    trajectory: list
    p_end: tuple | None = None
    nav_start: tuple = (0.0, 0.0)
    trace: list = field(default_factory=list)
    steps: int = 0
    collisions: int = 0
    explore_time_s: float = 0.0
    reason: str = ""


class _Terminate(Exception):
    def __init__(self, code: str, reason: str = ""):
        super().__init__(reason)
        self.code = code
        self.reason = reason


@dataclass
class _Segment:
    target: tuple[float, float]
    entrance: int | None = None


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class Episode:
    def __init__(self, scenario: Scenario, task_index: int, config: AgentConfig | None = None, backend=None):
        self.s = scenario
        self.cfg = config or AgentConfig()
        if not 0 <= task_index < len(scenario.tasks):
            raise IndexError(f"task index {task_index} out of range (scenario has {len(scenario.tasks)} tasks)")
        self.instr: Instruction = scenario.tasks[task_index]
        self.backend = backend if backend is not None else make_backend(self.cfg.backend, self.cfg.backend_timeout_s)
        self.world = rasterize(scenario, include_dynamic=False, only_preexisting=True)
        self.state = RobotState(scenario.start)
        self.trace: list[dict] = []
        self.t = 0.0
        self.steps = 0
        self.sim_steps = 0
        self.path_length = 0.0
        self.trajectory: list[tuple[float, float]] = [(scenario.start.x, scenario.start.y)]
        self.poses: deque = deque(maxlen=50)
        self.collisions = 0
        self.last_action: str | None = None
        self.p_hist: list[dict] = []
        # map state
        self.explored = False
        self.memory = None
        self.field = None
        self.labeling = None
        self.graph: TopoGraph | None = None
        self.graph_json: dict | None = None
        self.samples = None
        self.explore_time = 0.0
        # plan state
        self.p_end: np.ndarray | None = None
        self.plan_valid = False
        self.segments: list[_Segment] = []
        self.seg = 0
        self.seg_start = 0.0
        self.timeout_flagged = False
        self.penalized: list[int] = []
        self.passed_entrances: list[int] = []
        self.wps: np.ndarray | None = None
        self.wp_i = 0
        self.local_ready = False
        self.plan_failed = False
        self.local_blocked = False
        self.conflict_cells: list = []
        self.trigger: dict | None = None
        self.replans = {"local": 0, "global": 0}
        self.scans: deque = deque(maxlen=self.cfg.scan_memory)
        # vertex visits
        self.visits: dict[int, int] = {}
        self.inside: set[int] = set()
        self.visit_fired: set[int] = set()
        # no-global wall following
        self.follow: list | None = None
        self.follow_i = 0
        self.follow_d_hit = math.inf
        # repeated bumps at one spot mean local replanning is not helping
        self.last_bump = None
        self.stuck = False

    # ------------------------------------------------------------------ I/O
    def emit(self, event: str, **kw) -> None:
        rec = {"t": round(self.t, 6), "event": event}
        rec.update(kw)
        self.trace.append(rec)

    @property
    def pos(self) -> tuple[float, float]:
        return (self.state.pose.x, self.state.pose.y)

    def status(self) -> dict:
        c = self.cfg
        d_goal = _dist(self.pos, self.p_end) if self.p_end is not None else None
        return {
            "position": [round(self.pos[0], 6), round(self.pos[1], 6)],
            "explored": self.explored,
            "mapped": self.graph is not None,
            "plan_valid": self.plan_valid,
            "segment": self.seg,
            "n_segments": len(self.segments),
            "at_goal": self._at_goal(),
            "distance_to_goal": None if d_goal is None else round(d_goal, 6),
            "local_ready": self.local_ready,
            "plan_failed": self.plan_failed,
            "local_blocked": self.local_blocked,
            "conflict_cells": len(self.conflict_cells),
            "segment_time_s": round(self.t - self.seg_start, 6),
            "segment_timeout": self.trigger is not None and self.trigger["kind"] == "segment_timeout",
            "visit_trigger": self.trigger is not None and self.trigger["kind"] == "visit_limit",
            "visit_counts": {str(k): v for k, v in sorted(self.visits.items())},
            "replans_local": self.replans["local"],
            "replans_global": self.replans["global"],
            "max_global_replans": c.max_global_replans,
            "last_action": self.last_action,
        }

    def request(self, S: dict) -> str:
        M = {"graph": self.graph_json, "labels": self.field.labels if self.field is not None else []}
        T = [[round(t, 4), round(x, 4), round(y, 4), round(yaw, 4)] for t, x, y, yaw in self.poses]
        return encode_context(BACKGROUND, self.instr.to_dict(), M, self.p_hist[-10:], T, S)

    # ------------------------------------------------------------ main loop
    def run(self) -> EpisodeResult:
        code, reason = "Timeout", "step budget exhausted"
        try:
            while self.steps < self.cfg.step_budget:
                S = self.status()
                req = self.request(S) if self.backend.needs_context else None
                action, why = self.backend.decide(S, req)
                if why is not None:
                    self.emit("backend_fallback", reason=why, action=action)
                self.steps += 1
                self.last_action = action
                self.dispatch(action, S)
        except _Terminate as term:
            code, reason = term.code, term.reason
        if code == "Timeout":
            log.info("step budget exhausted")
        success = code == "Arrived"
        self.emit("terminate", code=code, success=success)
        nav_start = self.trajectory[0]
        return EpisodeResult(
            success=success, termination=code, path_length_m=self.path_length, sim_time_s=self.t,
            replans=dict(self.replans), trajectory=self.trajectory,
            p_end=None if self.p_end is None else (float(self.p_end[0]), float(self.p_end[1])),
            nav_start=nav_start, trace=self.trace, steps=self.steps, collisions=self.collisions,
            explore_time_s=self.explore_time, reason=reason)

    def dispatch(self, action: str, S: dict) -> None:
        handler = getattr(self, "do_" + action, None)
        if action not in ACTIONS or handler is None:
            raise _Terminate("ErrorReport", f"unknown action {action!r}")
        if not self._applicable(action):
            fallback = ScriptedBackend().decide(S)[0]
            self.emit("backend_fallback", reason=f"{action} not applicable", action=fallback)
            self.last_action = fallback
            action, handler = fallback, getattr(self, "do_" + fallback)
        handler()

    def _applicable(self, action: str) -> bool:
        if action in ("ReportError",):
            return True
        if action == "ExploreStep":
            return not self.explored
        if action == "BuildMap":
            return self.explored and self.graph is None
        if self.graph is None:
            return False
        if action == "PlanGlobal":
            return True
        if not self.plan_valid:
            return False
        if action == "ExecuteStep":
            return self.local_ready
        return True

    # -------------------------------------------------------------- actions
    def do_ExploreStep(self) -> None:
        c = self.cfg
        try:
            res = explore(self.s, c.explore, n=c.field_dim, seed=c.field_seed)
        except ExplorationFailed as exc:
            raise _Terminate("ErrorReport", str(exc))
        self.memory, self.field = res.memory, res.field
        # the sweep is its own phase; navigation is measured from the start pose
        self.explore_time = res.sim_time_s
        self.explored = True
        self.emit("explore", mode=res.mode, coverage=round(res.coverage, 6))

    def do_BuildMap(self) -> None:
        c = self.cfg
        self.labeling = segment_regions(self.memory, self.s.doors, self.field_rooms())
        self.graph = build_topo_graph(self.labeling, self.s.doors, self.memory)
        self.graph_json = graph_to_dict(self.graph)
        self.samples = sample_free_points(self.memory, c.sample_density, c.seed)
        self.emit("map", regions=self.labeling.names, vertices=len(self.graph.vertices),
                  edges=len(self.graph.edges))
        spawned = [ob for ob in self.s.dynamic_obstacles if ob.spawn_after_mapping]
        if spawned:
            self.world = rasterize(self.s, include_dynamic=True)
            for ob in spawned:
                self.emit("obstacle_spawn", rect=list(ob.rect))

    def field_rooms(self):
        names = set(self.field.labels)
        return [r for r in self.s.rooms if r.label in names]

    def _region_constraint(self):
        if self.instr.kind != "text" or not self.instr.region_label:
            return None
        if self.instr.region_label not in self.labeling.names:
            raise TargetNotFound(f"region {self.instr.region_label!r} is not on the map")
        return self.labeling.names.index(self.instr.region_label)

    def do_PlanGlobal(self) -> None:
        try:
            if self.p_end is None:
                self.p_end = resolve_goal(self.instr, self.field, self.samples, self.labeling,
                                          self._region_constraint())
            self._make_global_plan()
        except TargetNotFound as exc:
            raise _Terminate("NotFound", str(exc))
        except Unreachable as exc:
            raise _Terminate("Unreachable", str(exc))

    def _current_graph(self) -> TopoGraph:
        g = self.graph
        for e in self.penalized:
            g = penalize_edge(g, e)
        return g

    def _make_global_plan(self) -> None:
        p_end = (float(self.p_end[0]), float(self.p_end[1]))
        if self.cfg.no_global:
            self.segments = [_Segment(p_end)]
            self.follow = None
        else:
            gp = plan_global(self._current_graph(), self.labeling, self.pos, p_end)
            self.emit("global_plan", waypoints=[list(w) for w in gp.waypoints], entrances=gp.entrance_ids,
                      cost_m=round(gp.total_cost_m, 6), p_end=list(p_end))
            self.p_hist.append({"kind": "global", "entrances": gp.entrance_ids, "cost_m": round(gp.total_cost_m, 4)})
            segs = []
            for w, e in zip(gp.waypoints, gp.entrance_ids):
                if self.cfg.no_local:
                    a, b = self._door_approach(e, segs[-1].target if segs else self.pos)
                    segs += [_Segment(a, e), _Segment(w, e), _Segment(b, e)]
                else:
                    segs.append(_Segment(w, e))
            segs.append(_Segment(p_end))
            self.segments = segs
        self.seg = 0
        self.plan_valid = True
        self._new_segment()

    def _door_approach(self, entrance: int, prev):
        """Points in front of and behind a door along its normal, ordered
        along the direction of travel."""
        v = self.graph.vertex(entrance)
        door = next(d for d in self.s.doors if d.id == v.door_id) if v.door_id else None
        x, y = v.position
        k = self.cfg.door_approach_m
        vertical = door.axis == "v" if door is not None else True
        a, b = ((x - k, y), (x + k, y)) if vertical else ((x, y - k), (x, y + k))
        if _dist(prev, a) > _dist(prev, b):
            a, b = b, a
        return a, b

    def _new_segment(self) -> None:
        self.seg_start = self.t
        self.timeout_flagged = False
        self.local_ready = False
        self.wps = None
        self.wp_i = 0

    def do_PlanLocal(self) -> None:
        self._plan_local()

    def _plan_local(self) -> bool:
        """Fills the waypoint buffer for the current segment. Returns False
        (and raises the plan_failed flag) when nothing useful was found."""
        target = self.segments[self.seg].target
        pose = self.state.pose
        if self.cfg.no_local:
            wps = np.array([target], dtype=float)
        elif self.cfg.no_global:
            wps = self._greedy_waypoints()
            if wps is None:
                self.plan_failed = True
                self.local_ready = False
                return False
        else:
            cm = build_local_costmap(self.scans, self.memory, pose)
            try:
                lp = plan_local(cm, project_waypoint(target, pose, cm.half_extent_m))
            except LocalBlocked:
                self.plan_failed = True
                self.local_ready = False
                return False
            wps = lp.waypoints
        if _dist(wps[-1], self.pos) < 0.05 and _dist(self.pos, target) > self.cfg.arrival_radius_m:
            self.plan_failed = True
            self.local_ready = False
            return False
        self.wps, self.wp_i = wps, 0
        self.local_ready = True
        self.plan_failed = False
        self.emit("local_plan", segment=self.seg, waypoints=[[round(float(x), 6), round(float(y), 6)] for x, y in wps])
        return True

    def _greedy_waypoints(self):
        pose = self.state.pose
        cm = build_local_costmap(self.scans, self.memory, pose)
        if self.follow is not None:
            chunk = self.follow[self.follow_i:self.follow_i + 10]
            if not chunk:
                return None
            self.follow_i += len(chunk)
            return np.array(chunk, dtype=float)
        goal = (float(self.p_end[0]), float(self.p_end[1]))
        here = _dist(self.pos, goal)
        off, d_best = greedy_window_target(cm, goal)
        dx, dy = goal[0] - pose.x, goal[1] - pose.y
        if max(abs(dx), abs(dy)) < cm.half_extent_m and d_best < cm.cell_size_m:
            off = (dx, dy)
        elif d_best > here - 0.25:
            return None
        try:
            return plan_local(cm, off).waypoints
        except LocalBlocked:
            return None

    def do_ExecuteStep(self) -> None:
        c = self.cfg
        wp = self.wps[self.wp_i]
        x, y, yaw = self.state.pose
        d = _dist((x, y), wp)
        last = self.wp_i == len(self.wps) - 1
        err = _wrap(math.atan2(wp[1] - y, wp[0] - x) - yaw) if d > 1e-9 else 0.0
        wmax = self.state.max_yaw_rate_rps
        if d < 1e-9:
            v, w = 0.0, 0.0
        elif abs(err) > c.heading_tolerance_rad:
            v, w = 0.0, max(-wmax, min(wmax, err / c.dt_s))
        else:
            v = min(self.state.max_speed_mps, d / c.dt_s)
            w = max(-wmax, min(wmax, 2.0 * err))
        prev = (x, y)
        self.state, hit = step_robot(self.state, v, w, c.dt_s, self.world)
        self.t = self.state.sim_time_s
        self.sim_steps += 1
        cur = self.pos
        self.path_length += _dist(prev, cur)
        self.trajectory.append(cur)
        self.poses.append((self.t, cur[0], cur[1], self.state.pose.yaw))
        if c.record_poses:
            self.emit("pose", position=[round(cur[0], 6), round(cur[1], 6)], yaw=round(self.state.pose.yaw, 6))
        if hit:
            self.collisions += 1
            self.emit("collision")
            self.conflict_cells = [tuple(self.memory.world_to_cell(*cur))]
            self.local_ready = False
            self.stuck = self.last_bump is not None and _dist(cur, self.last_bump) < 0.05
            self.last_bump = cur
        # waypoint bookkeeping
        d = _dist(cur, wp)
        if (not last and d < 0.1) or (last and d < 0.02):
            self.wp_i += 1
            if self.wp_i >= len(self.wps):
                self.local_ready = False
                self._after_chunk()
        self._update_visits()
        self._check_segment()
        if not c.no_local and self.sim_steps % c.scan_every == 0:
            self._scan()

    def _after_chunk(self) -> None:
        if self.cfg.no_global and self.follow is not None:
            goal = (float(self.p_end[0]), float(self.p_end[1]))
            if _dist(self.pos, goal) < self.follow_d_hit - 0.5:
                saved = self.follow
                self.follow = None
                if self._greedy_waypoints() is not None:
                    self.emit("follow_leave", distance=round(_dist(self.pos, goal), 6))
                    return
                self.follow = saved

    def _check_segment(self) -> None:
        c = self.cfg
        if not self.plan_valid:
            return
        seg = self.segments[self.seg]
        # straight-line legs have to be completed, otherwise the next leg
        # starts off the door axis and clips the jamb
        radius = 0.05 if c.no_local else c.arrival_radius_m
        if self.seg < len(self.segments) - 1 and _dist(self.pos, seg.target) <= radius:
            if seg.entrance is not None and (not self.passed_entrances or self.passed_entrances[-1] != seg.entrance):
                self.passed_entrances.append(seg.entrance)
            self.seg += 1
            self._new_segment()
            return
        if self.t - self.seg_start > c.segment_timeout_s and not self.timeout_flagged:
            self.timeout_flagged = True
            self.emit("segment_timeout", segment=self.seg, elapsed_s=round(self.t - self.seg_start, 6))
            if self.trigger is None:
                self.trigger = {"kind": "segment_timeout", "entrance": self._blame_entrance()}

    def _blame_entrance(self) -> int | None:
        seg = self.segments[self.seg] if self.segments else None
        if seg is not None and seg.entrance is not None:
            return seg.entrance
        return self.passed_entrances[-1] if self.passed_entrances else None

    def _update_visits(self) -> None:
        if self.graph is None:
            return
        p = self.pos
        r = self.cfg.arrival_radius_m
        for v in self.graph.vertices:
            q = v.centroid if v.kind == "region" else v.position
            near = _dist(p, q) <= r
            if near and v.id not in self.inside:
                self.inside.add(v.id)
                self.visits[v.id] = self.visits.get(v.id, 0) + 1
                if self.visits[v.id] >= self.cfg.visit_limit and v.id not in self.visit_fired:
                    self.visit_fired.add(v.id)
                    self.emit("visit_limit", vertex=v.id, count=self.visits[v.id])
                    if self.trigger is None:
                        blame = v.id if v.kind == "entrance" else self._blame_entrance()
                        self.trigger = {"kind": "visit_limit", "entrance": blame}
            elif not near:
                self.inside.discard(v.id)

    def _scan(self) -> None:
        pose = self.state.pose
        if self.world.state_at(pose.x, pose.y) != FREE:
            return
        scan = simulate_depth(self.world, pose)
        self.scans.append(scan)
        cells = detect_conflict(scan, self.memory, pose, self.cfg.conflict_lookahead_m)
        if not cells:
            return
        rows = np.array([c[0] for c in cells])
        cols = np.array([c[1] for c in cells])
        self.memory.cells[rows, cols] = OCCUPIED
        self.emit("conflict", cells=len(cells))
        if self._threatens_plan(cells):
            self.conflict_cells = cells

    def _threatens_plan(self, cells) -> bool:
        if self.wps is None or not self.local_ready:
            return False
        pts = np.array([self.memory.cell_to_world(r, c) for r, c in cells])
        poly = np.vstack([[self.pos], self.wps[self.wp_i:]])
        margin = self.cfg.conflict_margin_m
        for a, b in zip(poly[:-1], poly[1:]):
            ab = b - a
            L2 = float(ab @ ab)
            t = np.clip(((pts - a) @ ab) / L2, 0.0, 1.0) if L2 > 0 else np.zeros(len(pts))
            d = np.hypot(*(a[None, :] + t[:, None] * ab[None, :] - pts).T)
            if (d < margin).any():
                return True
        return False

    def do_ReplanLocal(self) -> None:
        self.replans["local"] += 1
        self.conflict_cells = []
        self.plan_failed = False
        ok = False
        if self.cfg.no_local or self.stuck:
            ok = False
            self.stuck = False
        elif self.cfg.no_global:
            ok = self._start_follow()
        else:
            pose = self.state.pose
            if self.world.state_at(pose.x, pose.y) == FREE:
                self.scans.append(simulate_depth(self.world, pose))
            ok = self._plan_local()
            self.plan_failed = False
        self.emit("replan_local", ok=ok)
        if not ok:
            self.local_ready = False
            self.local_blocked = True
            if self.trigger is None:
                self.trigger = {"kind": "local_blocked", "entrance": self._blame_entrance()}

    def _start_follow(self) -> bool:
        """Left-wall following on the memory map, heading towards the goal
        first; left once the goal gets measurably closer."""
        mem = self.memory
        cs = mem.cell_size_m
        dist = ndimage.distance_transform_edt(mem.cells != OCCUPIED) * cs
        space = (mem.cells == FREE) & (dist > 0.3 + 1e-9)
        r, c = mem.world_to_cell(*self.pos)
        if not space[r, c]:
            _, (ir, ic) = ndimage.distance_transform_edt(~space, return_indices=True)
            r, c = int(ir[r, c]), int(ic[r, c])
        goal = self.p_end
        ang = math.atan2(goal[1] - self.pos[1], goal[0] - self.pos[0])
        heading = int(round(ang / (math.pi / 2))) % 4
        cells, _, _ = wall_follow_route(space, (r, c), heading, 4000)
        pts = [mem.cell_to_world(rr, cc) for rr, cc in cells[1::2]]
        if len(pts) < 2:
            return False
        self.follow = pts
        self.follow_i = 0
        self.follow_d_hit = _dist(self.pos, goal)
        return self._plan_local()

    def do_ReplanGlobal(self) -> None:
        trig = self.trigger or {"kind": "none", "entrance": None}
        self.replans["global"] += 1
        ent = trig.get("entrance")
        if not self.cfg.no_global and ent is not None and ent not in self.penalized:
            self.penalized.append(ent)
        self.trigger = None
        self.local_blocked = False
        self.plan_failed = False
        self.conflict_cells = []
        try:
            self._make_global_plan()
            ok = True
        except Unreachable:
            ok = False
        self.emit("replan_global", trigger=trig["kind"], penalized=list(self.penalized), ok=ok)
        if not ok:
            raise _Terminate("Unreachable", "goal disconnected after penalising entrances")

    def do_ReportError(self) -> None:
        raise _Terminate("ErrorReport", "re-planning attempts exhausted")

    def do_Stop(self) -> None:
        if self.p_end is not None and _dist(self.pos, self.p_end) <= self.cfg.success_radius_m:
            raise _Terminate("Arrived")
        raise _Terminate("ErrorReport", "stopped outside the success radius")

    def _at_goal(self) -> bool:
        if self.p_end is None or not self.plan_valid:
            return False
        d = _dist(self.pos, self.p_end)
        if d <= self.cfg.stop_tolerance_m:
            return True
        final = self.seg == len(self.segments) - 1 and (self.follow is None)
        return final and not self.local_ready and not self.plan_failed and self.wps is not None \
            and self.wp_i >= len(self.wps) and d <= self.cfg.success_radius_m


def run_episode(scenario: Scenario, task_index: int, config: AgentConfig | None = None, backend=None) -> EpisodeResult:
    ep = Episode(scenario, task_index, config, backend)
    try:
        return ep.run()
    finally:
        if backend is None:
            ep.backend.close()

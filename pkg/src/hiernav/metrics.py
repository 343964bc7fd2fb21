"""SR/SPL, oracle shortest paths, obstacle placement and batch benchmarks."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import ndimage

from .agent import AgentConfig, EpisodeResult, run_episode
from .gridpath import geodesic_field, nearest_true
from .global_plan import region_hops
from .semantic import Instruction
from .topo import build_topo_graph, locate_region, segment_regions
from .world import FREE, OCCUPIED, DynamicObstacle, OccupancyGrid, Scenario, rasterize


class OracleError(ValueError):
    pass


def traversable_mask(grid: OccupancyGrid, radius_m: float = 0.2) -> np.ndarray:
    """Free cells whose centre keeps a disc of ``radius_m`` off every Occupied
    cell (centre-to-centre clearance of radius + half a cell)."""
    dist = ndimage.distance_transform_edt(grid.cells != OCCUPIED) * grid.cell_size_m
    return (grid.cells == FREE) & (dist >= radius_m + grid.cell_size_m / 2 - 1e-9)


def oracle_shortest(grid: OccupancyGrid, start, goal, radius_m: float = 0.2, mask: np.ndarray | None = None) -> float:
    """8-connected shortest path (diagonals cs*sqrt(2), no corner cutting)
    on the radius-inflated grid, plus the offsets of the endpoints from
    their cell centres."""
    start = (float(start[0]), float(start[1]))
    goal = (float(goal[0]), float(goal[1]))
    if math.hypot(start[0] - goal[0], start[1] - goal[1]) < 1e-12:
        return 0.0
    mask = traversable_mask(grid, radius_m) if mask is None else mask
    cs = grid.cell_size_m
    ends = []
    for p in (start, goal):
        r, c = grid.world_to_cell(*p)
        snap = nearest_true(mask, r, c, max_cells=0.5 / cs)
        if snap is None:
            raise OracleError(f"point ({p[0]:.2f}, {p[1]:.2f}) is not in traversable space")
        ends.append(snap)
    d = geodesic_field(mask, [ends[0]], cs)[ends[1]]
    if not math.isfinite(d):
        raise OracleError("start and goal are disconnected")
    cx0 = grid.cell_to_world(*ends[0])
    cx1 = grid.cell_to_world(*ends[1])
    return float(math.hypot(start[0] - cx0[0], start[1] - cx0[1]) + d + math.hypot(goal[0] - cx1[0], goal[1] - cx1[1]))


def spl_term(success: bool, path_m: float, oracle_m: float | None) -> float:
    if not success:
        return 0.0
    if oracle_m is None or not math.isfinite(oracle_m):
        raise ValueError("successful episode needs a finite oracle length")
    denom = max(path_m, oracle_m)
    return 1.0 if denom <= 0 else oracle_m / denom


def compute_sr_spl(successes: Sequence[bool], paths: Sequence[float], oracles: Sequence[float | None]) -> tuple[float, float]:
    if len(successes) == 0:
        raise ValueError("no episodes")
    if not len(successes) == len(paths) == len(oracles):
        raise ValueError("length mismatch")
    terms = [spl_term(bool(s), float(p), o) for s, p, o in zip(successes, paths, oracles)]
    return float(np.mean([bool(s) for s in successes])), float(np.mean(terms))


def _rect_distance(rect, p) -> float:
    x0, y0, x1, y1 = rect
    dx = max(x0 - p[0], 0.0, p[0] - x1)
    dy = max(y0 - p[1], 0.0, p[1] - y1)
    return math.hypot(dx, dy)


def target_objects(s: Scenario, instr: Instruction):
    if instr.kind == "image":
        return [s.object(instr.embedding_seed)]
    if instr.kind == "text":
        objs = [o for o in s.objects if o.label == instr.target_label]
        if instr.region_label:
            rooms = {r.id for r in s.rooms if r.label == instr.region_label}
            objs = [o for o in objs if o.room in rooms]
        return objs
    return []


def task_success(s: Scenario, instr: Instruction, p, radius_m: float = 1.0) -> bool:
    """Ground-truth check: final position within the radius of the target
    extent (the right instance in the right room for region-constrained
    text goals)."""
    if instr.kind == "position":
        return math.hypot(p[0] - instr.position[0], p[1] - instr.position[1]) <= radius_m
    return any(_rect_distance(o.rect, p) <= radius_m for o in target_objects(s, instr))


def target_point(s: Scenario, instr: Instruction, grid: OccupancyGrid | None = None):
    """Representative ground-truth goal point (object centre or position)."""
    if instr.kind == "position":
        return (float(instr.position[0]), float(instr.position[1]))
    objs = target_objects(s, instr)
    if not objs:
        return None
    x0, y0, x1, y1 = objs[0].rect
    return ((x0 + x1) / 2, (y0 + y1) / 2)


def target_room(s: Scenario, instr: Instruction):
    if instr.kind == "position":
        return s.room_at(*instr.position)
    objs = target_objects(s, instr)
    return s.room(objs[0].room) if objs else None


def task_hops(s: Scenario, instr: Instruction) -> int | None:
    """Door count on the fewest-door route from the start room to the goal
    room, measured on the ground-truth region graph."""
    grid = rasterize(s)
    lab = segment_regions(grid, s.doors, s.rooms)
    g = build_topo_graph(lab, s.doors, grid)
    room = target_room(s, instr)
    a = locate_region(lab, (s.start.x, s.start.y))
    if room is None or a is None or room.id not in lab.room_to_region:
        return None
    return region_hops(g, a, lab.room_to_region[room.id])


# ---------------------------------------------------------------- obstacles

def place_obstacles(s: Scenario, route: Sequence, count: int, seed: int = 0, size_m: float = 0.5,
                    clearance_m: float = 1.0, spacing_m: float = 1.5, goal=None) -> list[DynamicObstacle]:
    """Square obstacles centred on a route polyline, kept away from doors,
    the start, the goal and walls, and spaced apart. The first k of the
    returned list form the k-obstacle set, so sets are nested."""
    pts = np.asarray(route, dtype=float)[:, :2]
    if len(pts) < 2 or count <= 0:
        return []
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    along = np.arange(0.0, cum[-1], 0.1)
    cand = np.stack([np.interp(along, cum, pts[:, 0]), np.interp(along, cum, pts[:, 1])], axis=1)
    keep = np.ones(len(cand), dtype=bool)
    avoid = [d.position for d in s.doors] + [(s.start.x, s.start.y), tuple(pts[-1])]
    if goal is not None:
        avoid.append(tuple(goal))
    for q in avoid:
        keep &= np.hypot(cand[:, 0] - q[0], cand[:, 1] - q[1]) >= clearance_m
    half = size_m / 2
    for i, p in enumerate(cand):
        if not keep[i]:
            continue
        room = s.room_at(*p)
        if room is None:
            keep[i] = False
            continue
        x0, y0, x1, y1 = room.rect
        if min(p[0] - x0, x1 - p[0], p[1] - y0, y1 - p[1]) < clearance_m + half:
            keep[i] = False
    cand = cand[keep]
    rng = np.random.default_rng(seed)
    chosen: list[np.ndarray] = []
    for i in rng.permutation(len(cand)):
        p = cand[i]
        if all(math.hypot(*(p - q)) >= spacing_m for q in chosen):
            chosen.append(p)
            if len(chosen) == count:
                break
    return [DynamicObstacle((round(float(p[0]) - half, 3), round(float(p[1]) - half, 3),
                             round(float(p[0]) + half, 3), round(float(p[1]) + half, 3)), True) for p in chosen]


def with_obstacles(s: Scenario, obstacles: Sequence[DynamicObstacle]) -> Scenario:
    return replace(s, dynamic_obstacles=list(s.dynamic_obstacles) + list(obstacles))


# ------------------------------------------------------------------- bench

@dataclass
class BenchConfig:
    tasks: tuple[int, ...] | None = None
    episodes_per_task: int = 1
    seeds: tuple[int, ...] = (0,)
    no_global: bool = False
    no_local: bool = False
    backend: str | None = None
    explore: str = "oracle"
    success_radius_m: float = 1.0
    workers: int = 1

    def agent_config(self, seed: int) -> AgentConfig:
        return AgentConfig(explore=self.explore, no_global=self.no_global, no_local=self.no_local, seed=seed,
                           backend=self.backend, success_radius_m=self.success_radius_m, record_poses=False)

    def echo(self) -> dict:
        d = asdict(self)
        d["tasks"] = None if self.tasks is None else list(self.tasks)
        d["seeds"] = list(self.seeds)
        d["ablations"] = [k for k, v in (("no-global", self.no_global), ("no-local", self.no_local)) if v]
        d["backend"] = self.backend or "scripted"
        d.pop("workers")
        return d


@dataclass
class BenchRow:
    scenario: str
    task: int
    instruction: str
    seed: int
    episode: int
    hops: int | None
    obstacles: int
    success: bool
    termination: str
    path_length_m: float
    oracle_length_m: float | None
    spl_contrib: float
    sim_time_s: float
    replans: dict
    collisions: int


@dataclass
class BenchReport:
    rows: list[BenchRow]
    config: dict
    traces: list = field(default_factory=list, repr=False)

    @property
    def sr(self) -> float:
        return float(np.mean([r.success for r in self.rows])) if self.rows else 0.0

    @property
    def spl(self) -> float:
        return float(np.mean([r.spl_contrib for r in self.rows])) if self.rows else 0.0

    @property
    def mean_time_s(self) -> float:
        return float(np.mean([r.sim_time_s for r in self.rows])) if self.rows else 0.0

    def aggregates(self) -> dict:
        return {"episodes": len(self.rows), "SR": self.sr, "SPL": self.spl, "mean_time_s": self.mean_time_s}

    def to_json(self, timestamp: str | None = None) -> str:
        ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        # timestamp stays alone on the second line so reports diff cleanly
        doc = {"timestamp": ts, "config": self.config, "aggregates": self.aggregates(),
               "episodes": [asdict(r) for r in self.rows]}
        return json.dumps(doc, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["scenario", "task", "instruction", "seed", "episode", "hops", "obstacles", "success", "termination",
                "path_length_m", "oracle_length_m", "spl_contrib", "sim_time_s", "replans_local", "replans_global",
                "collisions"]
        w.writerow(cols)
        for r in self.rows:
            w.writerow([r.scenario, r.task, r.instruction, r.seed, r.episode, r.hops, r.obstacles, int(r.success),
                        r.termination, repr(r.path_length_m), "" if r.oracle_length_m is None else repr(r.oracle_length_m),
                        repr(r.spl_contrib), repr(r.sim_time_s), r.replans["local"], r.replans["global"], r.collisions])
        return buf.getvalue()

    def write(self, json_path=None, csv_path=None) -> None:
        if json_path:
            with open(json_path, "w") as fh:
                fh.write(self.to_json())
        if csv_path:
            with open(csv_path, "w") as fh:
                fh.write(self.to_csv())

    def by_hops(self) -> dict[int, tuple[float, float, int]]:
        out = {}
        for h in sorted({r.hops for r in self.rows if r.hops is not None}):
            rows = [r for r in self.rows if r.hops == h]
            out[h] = (float(np.mean([r.success for r in rows])), float(np.mean([r.spl_contrib for r in rows])), len(rows))
        return out


def evaluate_episode(s: Scenario, task: int, res: EpisodeResult, radius_m: float = 1.0,
                     static: OccupancyGrid | None = None) -> tuple[bool, float | None, float]:
    """(success, oracle length, SPL term) against ground truth."""
    instr = s.tasks[task]
    final = res.trajectory[-1]
    ok = res.success and task_success(s, instr, final, radius_m)
    static = static if static is not None else rasterize(s, include_dynamic=False)
    goal = res.p_end if res.p_end is not None else target_point(s, instr)
    oracle = None
    if goal is not None:
        try:
            oracle = oracle_shortest(static, res.nav_start, goal)
        except OracleError:
            oracle = None
    if ok and oracle is None:
        ok = False
    return ok, oracle, spl_term(ok, res.path_length_m, oracle)


def _job(args):
    s, task, seed, episode, cfg, hops, keep_trace = args
    t0 = time.perf_counter()
    res = run_episode(s, task, cfg.agent_config(seed * 1000 + episode))
    wall = time.perf_counter() - t0
    ok, oracle, term = evaluate_episode(s, task, res, cfg.success_radius_m)
    n_obs = sum(1 for o in s.dynamic_obstacles)
    row = BenchRow(s.name, task, s.tasks[task].describe(), seed, episode, hops, n_obs, ok, res.termination,
                   res.path_length_m, oracle, term, res.sim_time_s, dict(res.replans), res.collisions)
    return row, (res.trace if keep_trace else None), wall


def run_bench(scenarios: Sequence[Scenario], config: BenchConfig | None = None, jobs: Sequence[tuple[int, int]] | None = None,
              keep_traces: bool = False, timings: list | None = None) -> BenchReport:
    """Run every (scenario, task) pair ``episodes_per_task`` times for each
    seed. ``jobs`` overrides the pairs with explicit (scenario index, task).
    Per-episode wall-clock seconds are appended to ``timings`` when given;
    they never enter the report, which stays byte-deterministic."""
    cfg = config or BenchConfig()
    if jobs is None:
        jobs = []
        for i, s in enumerate(scenarios):
            tasks = range(len(s.tasks)) if cfg.tasks is None else [t % len(s.tasks) for t in cfg.tasks]
            jobs.extend((i, t) for t in tasks)
    hop_cache: dict[tuple[int, int], int | None] = {}
    work = []
    for i, t in jobs:
        s = scenarios[i]
        if (i, t) not in hop_cache:
            hop_cache[(i, t)] = task_hops(s, s.tasks[t])
        for seed in cfg.seeds:
            for e in range(cfg.episodes_per_task):
                work.append((s, t, seed, e, cfg, hop_cache[(i, t)], keep_traces))
    if cfg.workers > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(cfg.workers) as pool:
            out = list(pool.map(_job, work, chunksize=max(1, len(work) // (4 * cfg.workers))))
    else:
        out = [_job(w) for w in work]
    rows = [r for r, _, _ in out]
    traces = [t for _, t, _ in out] if keep_traces else []
    if timings is not None:
        timings.extend(w for _, _, w in out)
    return BenchReport(rows, cfg.echo(), traces)

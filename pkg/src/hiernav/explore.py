"""Mapping before navigation: oracle copy of the static map, or a left-wall
following sweep with a right-facing depth camera."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .semantic import SemanticField
from .world import (FREE, OCCUPIED, UNKNOWN, DepthScan, OccupancyGrid, Pose, Scenario, door_gap_mask,
                    empty_grid, rasterize, simulate_depth)

ORACLE = "oracle"
WALL_FOLLOW = "wallfollow"
EXPLORE_MODES = (ORACLE, WALL_FOLLOW)

# heading index k -> (drow, dcol); 0 = +x, 1 = +y, 2 = -x, 3 = -y
_STEP = ((0, 1), (1, 0), (0, -1), (-1, 0))


class ExplorationFailed(RuntimeError):
    pass


@dataclass
class ExploreResult:
    memory: OccupancyGrid
    field: SemanticField
    mode: str
    coverage: float
    sim_time_s: float = 0.0
    path: list[tuple[float, float]] = field(default_factory=list)
    closed_loop: bool = True


def integrate_scan(memory: OccupancyGrid, scan: DepthScan, short_m: float | None = None) -> None:
    """Carve Free along each ray (stopping one cell short of a hit), then mark
    the hit cell Occupied."""
    cs = memory.cell_size_m
    short = cs if short_m is None else short_m
    step = cs / 2
    b = scan.bearings()
    r = scan.ranges
    reach = np.where(r < scan.max_range_m, r - short, r)
    kmax = int(math.ceil(float(reach.max()) / step)) if len(r) else 0
    if kmax > 0:
        d = (np.arange(kmax) + 0.5) * step
        keep = d[None, :] < reach[:, None]
        xs = scan.pose.x + np.cos(b)[:, None] * d[None, :]
        ys = scan.pose.y + np.sin(b)[:, None] * d[None, :]
        rows, cols = memory.cells_of_points(np.stack([xs[keep], ys[keep]], axis=1))
        ok = (rows >= 0) & (rows < memory.height) & (cols >= 0) & (cols < memory.width)
        sel = memory.cells[rows[ok], cols[ok]]
        # never erase an obstacle seen earlier by a closer, more direct ray
        memory.cells[rows[ok], cols[ok]] = np.where(sel == OCCUPIED, OCCUPIED, FREE)
    hit = r < scan.max_range_m
    if hit.any():
        rows, cols = memory.cells_of_points(scan.endpoints(extra=1e-4)[hit])
        ok = (rows >= 0) & (rows < memory.height) & (cols >= 0) & (cols < memory.width)
        memory.cells[rows[ok], cols[ok]] = OCCUPIED


def coverage(memory: OccupancyGrid, truth: OccupancyGrid) -> float:
    free = truth.cells == FREE
    n = int(free.sum())
    return float(((memory.cells == FREE) & free).sum()) / n if n else 0.0


def bound_field(s: Scenario, memory: OccupancyGrid, n: int = 64, seed: int = 42) -> SemanticField:
    """Semantic field over the rooms and objects whose extent holds at least
    one observed Free cell."""
    xs, ys = memory.centers_x(), memory.centers_y()
    free = memory.cells == FREE

    def seen(rect) -> bool:
        x0, y0, x1, y1 = rect
        mx = (xs >= x0) & (xs <= x1)
        my = (ys >= y0) & (ys <= y1)
        return bool(free[np.ix_(my, mx)].any())

    rooms = [r for r in s.rooms if seen(r.rect)]
    ids = {r.id for r in rooms}
    objects = [o for o in s.objects if o.room in ids and seen(o.rect)]
    return SemanticField(rooms, objects, n, seed)


def explore_oracle(s: Scenario, n: int = 64, seed: int = 42) -> ExploreResult:
    truth = rasterize(s, include_dynamic=False)
    return ExploreResult(truth.copy(), SemanticField(s.rooms, s.objects, n, seed), ORACLE, 1.0)


def _cspace(truth: OccupancyGrid, clearance_m: float) -> np.ndarray:
    free = truth.cells == FREE
    dist = ndimage.distance_transform_edt(truth.cells != OCCUPIED) * truth.cell_size_m
    return free & (dist > clearance_m + 1e-9)


def wall_follow_route(space: np.ndarray, start: tuple[int, int], heading: int, budget: int):
    """Left-hand rule on a 4-connected cell mask.

    Drives straight until blocked, turns so the obstacle is on the left and
    then keeps the left hand on the wall. Stops when a (cell, heading) state
    repeats. Returns (cells, headings, closed).
    """
    h, w = space.shape

    def free(r, c):
        return 0 <= r < h and 0 <= c < w and space[r, c]

    r, c = start
    cells, heads = [(r, c)], [heading]
    steps = 0
    while steps < budget:
        dr, dc = _STEP[heading]
        if not free(r + dr, c + dc):
            break
        r, c = r + dr, c + dc
        cells.append((r, c))
        heads.append(heading)
        steps += 1
    heading = (heading - 1) % 4
    seen = set()
    while steps < budget:
        state = (r, c, heading)
        if state in seen:
            return cells, heads, True
        seen.add(state)
        for turn in (1, 0, -1, 2):
            k = (heading + turn) % 4
            dr, dc = _STEP[k]
            if free(r + dr, c + dc):
                heading = k
                r, c = r + dr, c + dc
                cells.append((r, c))
                heads.append(k)
                steps += 1
                break
        else:
            return cells, heads, True
    return cells, heads, False


def _outer_heading(space: np.ndarray, start: tuple[int, int], preferred: int) -> int:
    """First heading (from ``preferred``, turning left) whose straight run ends
    against the outer obstacle contour; tracing an isolated wall junction
    would close the loop without leaving the room."""
    blocked, _ = ndimage.label(~space)
    outer = blocked[0, 0]
    h, w = space.shape
    for turn in range(4):
        k = (preferred + turn) % 4
        dr, dc = _STEP[k]
        r, c = start
        while 0 <= r + dr < h and 0 <= c + dc < w and space[r + dr, c + dc]:
            r, c = r + dr, c + dc
        rr, cc = r + dr, c + dc
        if not (0 <= rr < h and 0 <= cc < w) or blocked[rr, cc] == outer:
            return k
    return preferred


def explore_wall_follow(s: Scenario, clearance_m: float = 0.3, scan_every: int = 3, budget: int = 40000,
                        speed_mps: float = 0.5, n: int = 64, seed: int = 42,
                        min_coverage: float = 0.5) -> ExploreResult:
    truth = rasterize(s, include_dynamic=False, only_preexisting=True)
    space = _cspace(truth, clearance_m)
    r0, c0 = truth.world_to_cell(s.start.x, s.start.y)
    if not space[r0, c0]:
        dist, (ir, ic) = ndimage.distance_transform_edt(~space, return_indices=True)
        r0, c0 = int(ir[r0, c0]), int(ic[r0, c0])
    heading = _outer_heading(space, (r0, c0), int(round(s.start.yaw / (math.pi / 2))) % 4)
    cells, heads, closed = wall_follow_route(space, (r0, c0), heading, budget)
    memory = empty_grid(s)
    cs = truth.cell_size_m
    path = []
    for i, ((r, c), k) in enumerate(zip(cells, heads)):
        x, y = truth.cell_to_world(r, c)
        path.append((x, y))
        if i % scan_every == 0 or i == len(cells) - 1:
            yaw = k * math.pi / 2
            integrate_scan(memory, simulate_depth(truth, Pose(x, y, yaw - math.pi / 2)))
    # the robot's own footprint is known free
    for (x, y) in path:
        r, c = memory.world_to_cell(x, y)
        memory.cells[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2] = np.where(
            truth.cells[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2] == FREE, FREE,
            memory.cells[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2])
    for d in s.doors:
        gap = door_gap_mask(memory, d) & (truth.cells == FREE)
        memory.cells[gap] = FREE
    cov = coverage(memory, truth)
    t = (len(cells) - 1) * cs / speed_mps
    if not closed and cov < min_coverage:
        raise ExplorationFailed(f"exploration budget exhausted at {cov:.0%} coverage")
    return ExploreResult(memory, bound_field(s, memory, n, seed), WALL_FOLLOW, cov, t, path, closed)


def explore(s: Scenario, mode: str = ORACLE, **kw) -> ExploreResult:
    if mode == ORACLE:
        return explore_oracle(s, **{k: v for k, v in kw.items() if k in ("n", "seed")})
    if mode == WALL_FOLLOW:
        return explore_wall_follow(s, **kw)
    raise ValueError(f"unknown exploration mode {mode!r}")


__all__ = ["ORACLE", "WALL_FOLLOW", "EXPLORE_MODES", "ExplorationFailed", "ExploreResult", "explore",
           "explore_oracle", "explore_wall_follow", "wall_follow_route", "integrate_scan", "coverage",
           "bound_field", "UNKNOWN"]

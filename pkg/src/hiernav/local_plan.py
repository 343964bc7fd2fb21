"""Ego-centric receding-horizon planner over a robot-centred costmap window.

The window is axis-aligned with the world frame and centred on the robot;
memory seeds it, depth scans overwrite it, and occupied cells are dilated
by the inflation radius before an 8-connected A* search.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import ndimage

from .world import FREE, OCCUPIED, UNKNOWN, DepthScan, OccupancyGrid, Pose

C_FREE, C_INFLATED, C_OCCUPIED, C_UNKNOWN = 0, 1, 2, 3

WINDOW_SIDE_M = 5.0
WINDOW_CELL_M = 0.05
WAYPOINT_SPACING_M = 0.5
INFLATION_M = 0.3


class LocalBlocked(RuntimeError):
    pass


@dataclass
class LocalCostmap:
    cost: np.ndarray
    sensed: np.ndarray
    center: tuple[float, float]
    cell_size_m: float = WINDOW_CELL_M
    clearance: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.cost.shape[0]

    @property
    def half(self) -> int:
        return self.size // 2

    @property
    def half_extent_m(self) -> float:
        return self.half * self.cell_size_m

    def traversable(self) -> np.ndarray:
        return (self.cost == C_FREE) | (self.cost == C_UNKNOWN)

    def to_cell(self, offset) -> tuple[int, int]:
        """Window cell (row, col) containing a window-frame offset."""
        cs = self.cell_size_m
        return (self.half + int(math.floor(offset[1] / cs + 0.5)),
                self.half + int(math.floor(offset[0] / cs + 0.5)))

    def cell_offset(self, r: int, c: int) -> tuple[float, float]:
        cs = self.cell_size_m
        return ((c - self.half) * cs, (r - self.half) * cs)

    def cells_of_world(self, pts: np.ndarray):
        cs = self.cell_size_m
        cols = np.floor((pts[:, 0] - self.center[0]) / cs + 0.5).astype(np.int64) + self.half
        rows = np.floor((pts[:, 1] - self.center[1]) / cs + 0.5).astype(np.int64) + self.half
        ok = (rows >= 0) & (rows < self.size) & (cols >= 0) & (cols < self.size)
        return rows[ok], cols[ok]

    @classmethod
    def empty(cls, center=(0.0, 0.0), side_m: float = WINDOW_SIDE_M, cell_m: float = WINDOW_CELL_M):
        n = 2 * int(round(side_m / cell_m / 2)) + 1
        return cls(np.zeros((n, n), dtype=np.int8), np.zeros((n, n), dtype=bool), tuple(center), cell_m)


@dataclass
class LocalPlan:
    target: tuple[float, float]
    trajectory: list[tuple[int, int]]
    waypoints: np.ndarray
    length_m: float
    raw_length_m: float
    smooth_length_m: float = 0.0


def project_waypoint(v_next, pose: Pose, half_extent_m: float = WINDOW_SIDE_M / 2) -> tuple[float, float]:
    """Offset of ``v_next`` from the robot, clamped onto the window border
    (max-norm) along the same bearing."""
    dx, dy = float(v_next[0]) - pose.x, float(v_next[1]) - pose.y
    m = max(abs(dx), abs(dy))
    if m > half_extent_m:
        k = half_extent_m / m
        dx, dy = dx * k, dy * k
    return (dx, dy)


def _ray_samples(scans: Iterable[DepthScan], step: float, short: float):
    """Points along every ray up to ``range - short`` plus exact hit points."""
    free_pts, hit_pts = [], []
    for sc in scans:
        b = sc.bearings()
        r = sc.ranges
        ux, uy = np.cos(b), np.sin(b)
        reach = np.where(r < sc.max_range_m, r - short, r)
        kmax = int(math.ceil(float(reach.max()) / step)) if len(reach) else 0
        if kmax > 0:
            d = (np.arange(kmax) + 1) * step
            keep = d[None, :] < reach[:, None]
            xs = sc.pose.x + ux[:, None] * d[None, :]
            ys = sc.pose.y + uy[:, None] * d[None, :]
            free_pts.append(np.stack([xs[keep], ys[keep]], axis=1))
        h = r < sc.max_range_m
        if h.any():
            hr = r[h] + 1e-4
            hit_pts.append(np.stack([sc.pose.x + ux[h] * hr, sc.pose.y + uy[h] * hr], axis=1))
    f = np.concatenate(free_pts) if free_pts else np.zeros((0, 2))
    o = np.concatenate(hit_pts) if hit_pts else np.zeros((0, 2))
    return f, o


def build_local_costmap(scans: Iterable[DepthScan], memory: OccupancyGrid, pose: Pose,
                        side_m: float = WINDOW_SIDE_M, cell_m: float = WINDOW_CELL_M,
                        inflation_m: float = INFLATION_M) -> LocalCostmap:
    cm = LocalCostmap.empty((pose.x, pose.y), side_m, cell_m)
    # work on a margin-padded window so obstacles just outside the border
    # still inflate the cells inside it
    pad = int(math.ceil(inflation_m / cell_m)) + 1
    big = LocalCostmap.empty((pose.x, pose.y), side_m + 2 * pad * cell_m, cell_m)
    n = big.size
    offs = (np.arange(n) - big.half) * cell_m
    gx, gy = np.meshgrid(pose.x + offs, pose.y + offs)
    mem = memory.states_at(np.stack([gx, gy], axis=-1))
    cost = np.where(mem == OCCUPIED, C_OCCUPIED, np.where(mem == FREE, C_FREE, C_UNKNOWN)).astype(np.int8)
    sensed = big.sensed
    # stop carving a memory cell short of each hit so grazing rays cannot
    # open holes in walls
    free_pts, hit_pts = _ray_samples(scans, cell_m / 2, memory.cell_size_m)
    r, c = big.cells_of_world(free_pts)
    cost[r, c] = C_FREE
    sensed[r, c] = True
    r, c = big.cells_of_world(hit_pts)
    cost[r, c] = C_OCCUPIED
    sensed[r, c] = True
    occ = cost == C_OCCUPIED
    crop = np.s_[pad:pad + cm.size, pad:pad + cm.size]
    if occ.any():
        cells = ndimage.distance_transform_edt(~occ)
        # compare in cell units so cells exactly at the radius are inflated
        cost[(cells <= inflation_m / cell_m + 1e-9) & ~occ] = C_INFLATED
        cm.clearance = cells[crop] * cell_m
    cm.cost = cost[crop].copy()
    cm.sensed = sensed[crop].copy()
    return cm


_NBRS = [(-1, -1, math.sqrt(2)), (-1, 0, 1.0), (-1, 1, math.sqrt(2)), (0, -1, 1.0),
         (0, 1, 1.0), (1, -1, math.sqrt(2)), (1, 0, 1.0), (1, 1, math.sqrt(2))]


def astar(passable: np.ndarray, start: tuple[int, int], goal: tuple[int, int]):
    """8-connected A* (octile heuristic, no corner cutting). Returns the cell
    path and its length in cells, or (None, inf)."""
    h, w = passable.shape
    sr, sc = start
    gr, gc = goal
    if not passable[gr, gc]:
        return None, math.inf
    s2 = math.sqrt(2) - 1

    def heur(r, c):
        dr, dc = abs(r - gr), abs(c - gc)
        return max(dr, dc) + s2 * min(dr, dc)

    g = {start: 0.0}
    parent = {start: None}
    # ties on f go to the deeper node, which keeps open-space searches narrow
    heap = [(heur(sr, sc), 0.0, sr, sc)]
    closed = set()
    while heap:
        _, _, r, c = heapq.heappop(heap)
        if (r, c) in closed:
            continue
        if (r, c) == goal:
            break
        closed.add((r, c))
        gcur = g[(r, c)]
        for dr, dc, cost in _NBRS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or not passable[nr, nc]:
                continue
            if dr and dc and not (passable[r + dr, c] and passable[r, c + dc]):
                continue
            ng = gcur + cost
            if ng < g.get((nr, nc), math.inf):
                g[(nr, nc)] = ng
                parent[(nr, nc)] = (r, c)
                heapq.heappush(heap, (ng + heur(nr, nc), -ng, nr, nc))
    if goal not in parent:
        return None, math.inf
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()
    return path, g[goal]


def line_clear(passable: np.ndarray, a, b) -> bool:
    (r0, c0), (r1, c1) = a, b
    n = int(max(abs(r1 - r0), abs(c1 - c0)) * 4) + 1
    t = np.linspace(0.0, 1.0, n + 1)
    rr = np.floor(r0 + (r1 - r0) * t + 0.5).astype(np.int64)
    cc = np.floor(c0 + (c1 - c0) * t + 0.5).astype(np.int64)
    # also test the cells either side of each sample so diagonal slips are caught
    rf = np.floor(r0 + (r1 - r0) * t).astype(np.int64)
    cf = np.floor(c0 + (c1 - c0) * t).astype(np.int64)
    rcl = np.minimum(rf + 1, passable.shape[0] - 1)
    ccl = np.minimum(cf + 1, passable.shape[1] - 1)
    return bool(passable[rr, cc].all() and passable[rf, cf].all() and passable[rcl, ccl].all()
                and passable[rf, ccl].all() and passable[rcl, cf].all())


def shortcut(passable: np.ndarray, path: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Greedy line-of-sight smoothing: jump to the farthest visible cell."""
    if len(path) <= 2:
        return list(path)
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and not line_clear(passable, path[i], path[j]):
            j -= 1
        out.append(path[j])
        i = j
    return out


def resample(poly: np.ndarray, spacing: float) -> np.ndarray:
    """Points every ``spacing`` metres of arc length (m = ceil(L / spacing),
    excluding the start, ending on the last vertex). Interior corners of the
    polyline are kept as well so that straight moves between consecutive
    waypoints never cut a corner of the planned path."""
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    total = float(seg.sum())
    if total <= 1e-12:
        return poly[-1:].copy()
    m = max(1, int(math.ceil(total / spacing - 1e-9)))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, total, m + 1)[1:]
    corners = cum[1:-1]
    s_all = np.unique(np.concatenate([s, corners]))
    # drop corners that practically coincide with a regular sample
    keep = np.concatenate([[True], np.diff(s_all) > 1e-6])
    s_all = s_all[keep]
    x = np.interp(s_all, cum, poly[:, 0])
    y = np.interp(s_all, cum, poly[:, 1])
    out = np.stack([x, y], axis=1)
    out[-1] = poly[-1]
    return out


def plan_local(cm: LocalCostmap, target, spacing: float = WAYPOINT_SPACING_M,
               goal_slack_m: float = 0.5, escape_m: float = 0.15) -> LocalPlan:
    """Plan from the window centre to ``target`` (window-frame offset)."""
    n = cm.size
    centre = (cm.half, cm.half)
    if cm.cost[centre] == C_OCCUPIED:
        raise LocalBlocked("robot cell is occupied")
    passable = cm.traversable()
    # let the robot leave an inflated cell it already stands in, through
    # nearby cells that are no closer to an obstacle than it is now
    if not passable[centre]:
        k = int(math.ceil(escape_m / cm.cell_size_m))
        sl = np.s_[max(cm.half - k, 0):cm.half + k + 1, max(cm.half - k, 0):cm.half + k + 1]
        yy, xx = np.mgrid[sl]
        near = (yy - cm.half) ** 2 + (xx - cm.half) ** 2 <= k * k
        clear = cm.clearance if cm.clearance is not None else np.full(cm.cost.shape, np.inf)
        ok = near & (cm.cost[sl] == C_INFLATED) & (clear[sl] >= clear[centre] - 1e-9)
        passable[sl] |= ok
    tr, tc = cm.to_cell(target)
    tr = min(max(tr, 0), n - 1)
    tc = min(max(tc, 0), n - 1)
    goal = (tr, tc)
    exact = True
    if not passable[goal]:
        exact = False
        k = int(math.floor(goal_slack_m / cm.cell_size_m))
        best = None
        for dr in range(-k, k + 1):
            for dc in range(-k, k + 1):
                rr, cc = tr + dr, tc + dc
                d2 = dr * dr + dc * dc
                if d2 > k * k or not (0 <= rr < n and 0 <= cc < n) or not passable[rr, cc]:
                    continue
                key = (d2, rr, cc)
                if best is None or key < best:
                    best = key
        if best is None:
            raise LocalBlocked("target blocked")
        goal = (best[1], best[2])
    path, raw = astar(passable, centre, goal)
    if path is None:
        raise LocalBlocked("no path inside the window")
    smooth = shortcut(passable, path)
    cells = np.array(smooth, dtype=float)
    smooth_len = float(np.linalg.norm(np.diff(cells, axis=0), axis=1).sum()) * cm.cell_size_m
    offs = np.array([cm.cell_offset(r, c) for r, c in smooth], dtype=float)
    offs[0] = (0.0, 0.0)
    if exact:
        offs[-1] = (float(target[0]), float(target[1]))
    poly = offs + np.asarray(cm.center)
    wps = resample(poly, spacing)
    length = float(np.linalg.norm(np.diff(poly, axis=0), axis=1).sum())
    return LocalPlan(tuple(map(float, target)), path, wps, length, raw * cm.cell_size_m, smooth_len)


def detect_conflict(scan: DepthScan, memory: OccupancyGrid, pose: Pose | None = None,
                    lookahead_m: float = 2.0) -> list[tuple[int, int]]:
    """Memory cells (row, col) that a hit within ``lookahead_m`` reports as
    occupied while memory believes them free."""
    h = scan.ranges <= lookahead_m
    h &= scan.ranges < scan.max_range_m
    if not h.any():
        return []
    pts = scan.endpoints(extra=1e-4)[h]
    rows, cols = memory.cells_of_points(pts)
    ok = (rows >= 0) & (rows < memory.height) & (cols >= 0) & (cols < memory.width)
    rows, cols = rows[ok], cols[ok]
    bad = memory.cells[rows, cols] == FREE
    return sorted({(int(r), int(c)) for r, c in zip(rows[bad], cols[bad])})


def greedy_window_target(cm: LocalCostmap, goal_world) -> tuple[tuple[float, float], float]:
    """Reachable window cell closest to a far goal, as (offset, distance)."""
    passable = cm.traversable()
    centre = (cm.half, cm.half)
    passable = passable.copy()
    passable[centre] = True
    lab, _ = ndimage.label(passable)
    reach = lab == lab[centre]
    rr, cc = np.nonzero(reach)
    cs = cm.cell_size_m
    wx = cm.center[0] + (cc - cm.half) * cs
    wy = cm.center[1] + (rr - cm.half) * cs
    d = np.hypot(wx - goal_world[0], wy - goal_world[1])
    k = int(np.argmin(d))
    return cm.cell_offset(int(rr[k]), int(cc[k])), float(d[k])


def costmap_unknown_as_free(cm: LocalCostmap) -> np.ndarray:
    return cm.traversable()


__all__ = [
    "LocalCostmap", "LocalPlan", "LocalBlocked", "project_waypoint", "build_local_costmap", "plan_local",
    "detect_conflict", "astar", "shortcut", "resample", "greedy_window_target", "C_FREE", "C_INFLATED",
    "C_OCCUPIED", "C_UNKNOWN", "UNKNOWN",
]

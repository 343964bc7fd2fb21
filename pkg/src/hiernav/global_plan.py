"""Goal resolution by similarity argmax and sparse entrance-level planning."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .gridpath import geodesic_field, nearest_true
from .semantic import Instruction, SemanticField, encode_instruction
from .topo import RegionLabeling, TopoGraph, locate_region
from .world import FREE, OccupancyGrid

TAU_SIM = 0.2


class TargetNotFound(LookupError):
    pass


class Unreachable(RuntimeError):
    pass


@dataclass
class SamplePointSet:
    points: np.ndarray
    density: float
    seed: int


def sample_free_points(grid: OccupancyGrid, density: float = 4.0, seed: int = 0) -> SamplePointSet:
    """Stratified uniform samples over Free cells.

    Free space is tiled into squares holding one expected sample each. Every
    tile receives the integer part of its expected count and the fractional
    remainders are drawn by systematic sampling, so the total is exactly
    floor(density * free area) and a fully free tile always holds a sample.
    """
    free = grid.cells == FREE
    n_free = int(free.sum())
    if n_free == 0:
        raise ValueError("no free space")
    cs = grid.cell_size_m
    total = math.floor(density * n_free * cs * cs + 1e-9)
    if total <= 0:
        raise ValueError("no samples")
    rng = np.random.default_rng(seed)
    t = max(1, int(round(1.0 / math.sqrt(density) / cs)))
    rr, cc = np.nonzero(free)
    tile = (rr // t) * ((grid.width + t - 1) // t) + (cc // t)
    order = np.lexsort((cc, rr, tile))
    rr, cc, tile = rr[order], cc[order], tile[order]
    tiles, starts, counts = np.unique(tile, return_index=True, return_counts=True)
    mass = density * counts * cs * cs
    base = np.floor(mass + 1e-9).astype(np.int64)
    frac = np.clip(mass - base, 0.0, None)
    extra = total - int(base.sum())
    take = base.copy()
    if extra > 0:
        cum = np.cumsum(frac)
        marks = rng.random() + np.arange(extra)
        hit = np.searchsorted(cum, marks, side="right")
        hit = hit[hit < len(take)]
        np.add.at(take, hit, 1)
    pts = []
    for k in np.nonzero(take)[0]:
        pick = starts[k] + rng.integers(0, counts[k], size=take[k])
        jitter = rng.random((take[k], 2))
        x = grid.origin[0] + (cc[pick] + jitter[:, 0]) * cs
        y = grid.origin[1] + (rr[pick] + jitter[:, 1]) * cs
        pts.append(np.stack([x, y], axis=1))
    points = np.concatenate(pts)[:total]
    return SamplePointSet(points, density, seed)


def resolve_goal(instr: Instruction, field: SemanticField, samples: SamplePointSet,
                 labeling: RegionLabeling | None = None, region_constraint: int | None = None,
                 tau: float = TAU_SIM, w_v: float = 0.5) -> np.ndarray:
    """Highest-similarity sample for a text/image goal; lowest index wins ties."""
    if instr.kind == "position":
        return np.asarray(instr.position, dtype=float)[:2]
    pts = samples.points
    if len(pts) == 0:
        raise ValueError("empty sample set")
    q = encode_instruction(instr, field.n, field.seed, field.catalog)
    cand = np.arange(len(pts))
    if region_constraint is not None:
        if labeling is None:
            raise ValueError("region constraint needs a labeling")
        cand = cand[labeling.regions_at(pts) == region_constraint]
        if cand.size == 0:
            raise TargetNotFound(f"no samples inside region {region_constraint}")
    sims = field.similarities(q, pts[cand], w_v)
    best = int(np.argmax(sims))
    if sims[best] < tau:
        raise TargetNotFound(f"target not found (best similarity {sims[best]:.3f} < {tau})")
    return pts[cand[best]].copy()


@dataclass
class GlobalPlan:
    p_start: np.ndarray
    p_end: np.ndarray
    waypoints: list[tuple[float, float]]
    entrance_ids: list[int]
    total_cost_m: float
    region_path: list[int] = field(default_factory=list)


def _region_of(labeling: RegionLabeling, p, slack_m: float = 0.5) -> int:
    rid = locate_region(labeling, p)
    if rid is not None:
        return rid
    grid = labeling.grid
    r, c = grid.world_to_cell(float(p[0]), float(p[1]))
    snap = nearest_true(labeling.labels >= 0, r, c, slack_m / grid.cell_size_m)
    if snap is None:
        raise ValueError(f"point ({p[0]:.2f}, {p[1]:.2f}) is not in any known region")
    return int(labeling.labels[snap])


def _cell_in(mask: np.ndarray, grid: OccupancyGrid, p) -> tuple[int, int]:
    r, c = grid.world_to_cell(float(p[0]), float(p[1]))
    snap = nearest_true(mask, r, c)
    if snap is None:
        raise ValueError("empty region")
    return snap


def intra_region_distance(labeling: RegionLabeling, region: int, a, b) -> float:
    """Grid geodesic between two points inside one region. The field from
    ``a``'s cell is cached on the labeling, so repeated queries from a
    region centroid cost one Dijkstra."""
    grid = labeling.grid
    mask = labeling.labels == region
    ca, cb = _cell_in(mask, grid, a), _cell_in(mask, grid, b)
    if ca == cb:
        return math.hypot(a[0] - b[0], a[1] - b[1])
    key = (region, ca)
    dist = labeling.field_cache.get(key)
    if dist is None:
        dist = labeling.field_cache[key] = geodesic_field(mask, [ca], grid.cell_size_m)
    return float(dist[cb])


def augmented_adjacency(g: TopoGraph, labeling: RegionLabeling, p_start, p_end):
    """Graph adjacency plus virtual start/end vertices ("S", "E") attached to
    their region vertices."""
    rs, re_ = _region_of(labeling, p_start), _region_of(labeling, p_end)
    adj: dict = {k: list(v) for k, v in g.adjacency().items()}
    adj["S"], adj["E"] = [], []
    ds = intra_region_distance(labeling, rs, g.vertex(rs).centroid, p_start)
    de = intra_region_distance(labeling, re_, g.vertex(re_).centroid, p_end)
    if math.isfinite(ds):
        adj["S"].append((rs, ds))
        adj[rs].append(("S", ds))
    if math.isfinite(de):
        adj["E"].append((re_, de))
        adj[re_].append(("E", de))
    return adj, rs, re_


def plan_global(g: TopoGraph, labeling: RegionLabeling, p_start, p_end) -> GlobalPlan:
    p_start = np.asarray(p_start, dtype=float)[:2]
    p_end = np.asarray(p_end, dtype=float)[:2]
    rs, re_ = _region_of(labeling, p_start), _region_of(labeling, p_end)
    if rs == re_:
        d = intra_region_distance(labeling, rs, p_start, p_end)
        if not math.isfinite(d):
            raise Unreachable("goal not reachable inside its region")
        return GlobalPlan(p_start, p_end, [], [], d, [rs])
    adj, _, _ = augmented_adjacency(g, labeling, p_start, p_end)
    order = {v.id: i for i, v in enumerate(g.vertices)}
    order["S"], order["E"] = -1, len(order)
    dist = {"S": 0.0}
    prev: dict = {}
    heap = [(0.0, -1, "S")]
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == "E":
            break
        for v, w in adj[u]:
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, order[v], v))
    if "E" not in done:
        raise Unreachable("goal region is disconnected from the start region")
    path = ["E"]
    while path[-1] != "S":
        path.append(prev[path[-1]])
    path.reverse()
    inner = path[1:-1]
    ents = [v for v in inner if g.vertex(v).kind == "entrance"]
    regions = [v for v in inner if g.vertex(v).kind == "region"]
    return GlobalPlan(p_start, p_end, [tuple(g.vertex(v).position) for v in ents], ents, dist["E"], regions)


def region_hops(g: TopoGraph, a: int, b: int) -> int | None:
    """Number of entrances crossed on the fewest-door route between regions."""
    adj = g.adjacency()
    seen = {a: 0}
    todo = [a]
    while todo:
        nxt = []
        for u in todo:
            for v, _ in adj[u]:
                if v not in seen:
                    seen[v] = seen[u] + 1
                    nxt.append(v)
        todo = nxt
    return None if b not in seen else seen[b] // 2

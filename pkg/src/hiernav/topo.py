"""Region segmentation and the bipartite region/entrance graph."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .gridpath import geodesic_field, nearest_true
from .world import FREE, Door, OccupancyGrid, door_gap_mask


class GraphError(ValueError):
    pass


@dataclass
class RegionLabeling:
    """Cell -> region id (-1 where no region)."""

    labels: np.ndarray
    names: list[str]
    grid: OccupancyGrid
    room_to_region: dict[str, int] = field(default_factory=dict)
    gap_masks: dict[str, np.ndarray] = field(default_factory=dict)
    # geodesic fields keyed by (region, source cell); labels never change
    field_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n_regions(self) -> int:
        return len(self.names)

    def mask(self, region: int) -> np.ndarray:
        return self.labels == region

    def region_of_cell(self, r: int, c: int) -> int | None:
        if not self.grid.in_bounds(r, c):
            return None
        v = int(self.labels[r, c])
        return None if v < 0 else v

    def regions_at(self, pts: np.ndarray) -> np.ndarray:
        rows, cols = self.grid.cells_of_points(np.asarray(pts)[..., :2])
        ok = (rows >= 0) & (rows < self.grid.height) & (cols >= 0) & (cols < self.grid.width)
        out = np.full(rows.shape, -1, dtype=np.int64)
        out[ok] = self.labels[rows[ok], cols[ok]]
        return out


def segment_regions(grid: OccupancyGrid, doors: list[Door], rooms=None) -> RegionLabeling:
    """Seal door gaps, flood-fill free space, then hand each gap cell back to
    its lowest-id neighbouring region."""
    gaps = {d.id: door_gap_mask(grid, d) & (grid.cells == FREE) for d in doors}
    gap_all = np.zeros(grid.cells.shape, dtype=bool)
    for m in gaps.values():
        gap_all |= m
    sealed = (grid.cells == FREE) & ~gap_all
    comp, n_comp = ndimage.label(sealed)
    order: list[int] = []
    names: list[str] = []
    room_to_region: dict[str, int] = {}
    for room in rooms or []:
        r, c = grid.world_to_cell(*room.center)
        k = int(comp[r, c]) if grid.in_bounds(r, c) else 0
        if k == 0 or k in order:
            x0, y0, x1, y1 = room.rect
            r0, c0 = grid.world_to_cell(x0, y0)
            r1, c1 = grid.world_to_cell(x1, y1)
            patch = comp[max(r0, 0):r1 + 1, max(c0, 0):c1 + 1]
            vals = [v for v in np.unique(patch[patch > 0]) if v not in order]
            if not vals:
                continue
            k = int(max(vals, key=lambda v: (int((patch == v).sum()), -v)))
        room_to_region[room.id] = len(order)
        order.append(k)
        names.append(room.label)
    for k in range(1, n_comp + 1):
        if k not in order:
            names.append(f"region_{len(order)}")
            order.append(k)
    remap = np.full(n_comp + 1, -1, dtype=np.int64)
    for rid, k in enumerate(order):
        remap[k] = rid
    labels = remap[comp]
    # gap cells join the lowest-id 4-neighbour region; repeat so long gaps fill in
    h, w = labels.shape
    pending = list(zip(*np.nonzero(gap_all)))
    for _ in range(4):
        left = []
        for r, c in pending:
            nb = [labels[rr, cc] for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
                  if 0 <= rr < h and 0 <= cc < w and labels[rr, cc] >= 0 and not gap_all[rr, cc]]
            if nb:
                labels[r, c] = min(nb)
            else:
                left.append((r, c))
        pending = left
        if not pending:
            break
    return RegionLabeling(labels, names, grid, room_to_region, gaps)


def locate_region(labeling: RegionLabeling, p) -> int | None:
    r, c = labeling.grid.world_to_cell(float(p[0]), float(p[1]))
    return labeling.region_of_cell(r, c)


@dataclass(frozen=True)
class RegionVertex:
    id: int
    label: str
    centroid: tuple[float, float]
    kind: str = "region"


@dataclass(frozen=True)
class EntranceVertex:
    id: int
    position: tuple[float, float]
    connects: tuple[int, int]
    door_id: str = field(default="", compare=False)
    kind: str = "entrance"


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    weight_m: float


@dataclass
class TopoGraph:
    vertices: list
    edges: list[Edge]

    def vertex(self, vid: int):
        for v in self.vertices:
            if v.id == vid:
                return v
        raise KeyError(vid)

    @property
    def regions(self) -> list[RegionVertex]:
        return [v for v in self.vertices if v.kind == "region"]

    @property
    def entrances(self) -> list[EntranceVertex]:
        return [v for v in self.vertices if v.kind == "entrance"]

    def adjacency(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            if math.isfinite(e.weight_m):
                adj[e.a].append((e.b, e.weight_m))
                adj[e.b].append((e.a, e.weight_m))
        return adj

    def validate(self) -> None:
        kinds = {v.id: v.kind for v in self.vertices}
        if len(kinds) != len(self.vertices):
            raise GraphError("duplicate vertex id")
        degree = {v.id: 0 for v in self.vertices}
        for e in self.edges:
            if not e.weight_m > 0:
                raise GraphError(f"edge {e.a}-{e.b} has non-positive weight {e.weight_m}")
            if e.a not in kinds or e.b not in kinds:
                raise GraphError(f"edge {e.a}-{e.b} references a missing vertex")
            if kinds[e.a] == kinds[e.b]:
                raise GraphError(f"edge {e.a}-{e.b} is not region-entrance")
            degree[e.a] += 1
            degree[e.b] += 1
        for v in self.entrances:
            if degree[v.id] != 2:
                raise GraphError(f"entrance {v.id} has degree {degree[v.id]}")
            ends = {e.a if e.b == v.id else e.b for e in self.edges if v.id in (e.a, e.b)}
            if ends != set(v.connects):
                raise GraphError(f"entrance {v.id} edges disagree with its connects field")


def build_topo_graph(labeling: RegionLabeling, doors: list[Door], grid: OccupancyGrid | None = None) -> TopoGraph:
    """One region vertex per region, one entrance vertex per passable door;
    edge weights are intra-region geodesics from centroid to entrance."""
    grid = grid or labeling.grid
    cs = grid.cell_size_m
    xs, ys = grid.centers_x(), grid.centers_y()
    vertices: list = []
    centroid_cells = []
    for rid, name in enumerate(labeling.names):
        rr, cc = np.nonzero(labeling.labels == rid)
        cx, cy = float(xs[cc].mean()), float(ys[rr].mean())
        r, c = grid.world_to_cell(cx, cy)
        snap = nearest_true(labeling.labels == rid, r, c)
        if snap != (r, c):
            r, c = snap
            cx, cy = grid.cell_to_world(r, c)
        centroid_cells.append((r, c))
        vertices.append(RegionVertex(rid, name, (cx, cy)))
    entrances = []
    for d in doors:
        gap = labeling.gap_masks.get(d.id)
        if gap is None:
            gap = door_gap_mask(grid, d) & (grid.cells == FREE)
        if not gap.any():
            continue
        r, c = grid.world_to_cell(*d.position)
        if not gap[r, c]:
            r, c = nearest_true(gap, r, c)
        sides = _door_sides(labeling, d, gap)
        if sides is None:
            continue
        entrances.append((d, (r, c), gap, sides))
    n_reg = len(vertices)
    for k, (d, _, _, sides) in enumerate(entrances):
        vertices.append(EntranceVertex(n_reg + k, (float(d.position[0]), float(d.position[1])), sides, d.id))
    edges: list[Edge] = []
    for rid in range(n_reg):
        mine = [(k, cell, gap) for k, (d, cell, gap, sides) in enumerate(entrances) if rid in sides]
        if not mine:
            continue
        mask = labeling.labels == rid
        for _, _, gap in mine:
            mask = mask | gap
        dist = geodesic_field(mask, [centroid_cells[rid]], cs)
        for k, cell, _ in mine:
            dm = float(dist[cell])
            if math.isfinite(dm):
                edges.append(Edge(rid, n_reg + k, max(dm, cs)))
    # drop entrances that could not be attached on both sides
    deg = {}
    for e in edges:
        deg[e.b] = deg.get(e.b, 0) + 1
    dead = {v.id for v in vertices if v.kind == "entrance" and deg.get(v.id, 0) != 2}
    if dead:
        edges = [e for e in edges if e.b not in dead]
        vertices = [v for v in vertices if v.id not in dead]
    edges.sort(key=lambda e: (e.b, e.a))
    g = TopoGraph(vertices, edges)
    g.validate()
    return g


def _door_sides(labeling: RegionLabeling, d: Door, gap: np.ndarray):
    if d.connects[0] in labeling.room_to_region and d.connects[1] in labeling.room_to_region:
        a, b = labeling.room_to_region[d.connects[0]], labeling.room_to_region[d.connects[1]]
        return (a, b) if a != b else None
    # no room mapping: look at the regions on both faces of the gap
    grown = ndimage.binary_dilation(gap, iterations=1) & ~gap
    found = sorted({int(v) for v in labeling.labels[grown] if v >= 0})
    return (found[0], found[1]) if len(found) == 2 else None


def penalize_edge(g: TopoGraph, entrance_id: int) -> TopoGraph:
    """Copy of ``g`` with both edges of an entrance set to +inf."""
    if entrance_id not in {v.id for v in g.entrances}:
        raise KeyError(f"no entrance vertex {entrance_id}")
    edges = [replace(e, weight_m=math.inf) if entrance_id in (e.a, e.b) else e for e in g.edges]
    return TopoGraph(list(g.vertices), edges)


def graph_to_dict(g: TopoGraph) -> dict:
    verts = []
    for v in g.vertices:
        if v.kind == "region":
            verts.append({"id": v.id, "kind": "region", "label": v.label, "centroid": list(v.centroid)})
        else:
            verts.append({"id": v.id, "kind": "entrance", "position": list(v.position), "connects": list(v.connects)})
    edges = [{"a": e.a, "b": e.b, "weight_m": e.weight_m if math.isfinite(e.weight_m) else None} for e in g.edges]
    return {"vertices": verts, "edges": edges}


def serialize_graph(g: TopoGraph) -> str:
    # +inf (penalised) weights are written as null
    return json.dumps(graph_to_dict(g), separators=(",", ":"))


def deserialize_graph(text: str) -> TopoGraph:
    try:
        d = json.loads(text)
        verts = []
        for v in d["vertices"]:
            if v["kind"] == "region":
                verts.append(RegionVertex(int(v["id"]), str(v["label"]), (float(v["centroid"][0]), float(v["centroid"][1]))))
            elif v["kind"] == "entrance":
                a, b = v["connects"]
                verts.append(EntranceVertex(int(v["id"]), (float(v["position"][0]), float(v["position"][1])), (int(a), int(b))))
            else:
                raise GraphError(f"unknown vertex kind {v['kind']!r}")
        edges = [Edge(int(e["a"]), int(e["b"]), math.inf if e["weight_m"] is None else float(e["weight_m"]))
                 for e in d["edges"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError(f"malformed graph JSON: {exc}") from exc
    g = TopoGraph(verts, edges)
    g.validate()
    return g

"""Deterministic 2D multi-room world: scenario schema, rasterization, depth
scans, unicycle kinematics and a seeded scenario generator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .semantic import Instruction

FREE, OCCUPIED, UNKNOWN = 0, 1, 2

EPS = 1e-6

# camera resolution of the original RGB-D setup; kept for reference, the 2D
# world only uses a single scan line
CAMERA_RESOLUTION = (480, 640)

OBJECT_LABELS = ("chair", "couch", "potted plant", "bed", "toilet", "tv")
ROOM_LABELS = (
    "living room", "kitchen", "hall", "bedroom", "bathroom", "office",
    "dining room", "study", "laundry room", "garage", "nursery", "pantry",
    "library", "gym", "den", "attic",
)


class ScenarioError(ValueError):
    """Raised when a scenario file is malformed or violates an invariant."""


Rect = tuple[float, float, float, float]


class Pose(NamedTuple):
    x: float
    y: float
    yaw: float


@dataclass(frozen=True)
class Room:
    id: str
    label: str
    rect: Rect

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.rect
        return ((x0 + x1) / 2, (y0 + y1) / 2)


@dataclass(frozen=True)
class Door:
    id: str
    connects: tuple[str, str]
    position: tuple[float, float]
    width_m: float
    # "v" for a door in a vertical wall (x = const), "h" otherwise; derived
    axis: str = field(default="", compare=False)


@dataclass(frozen=True)
class SceneObject:
    id: str
    label: str
    room: str
    rect: Rect
    blocking: bool = False


@dataclass(frozen=True)
class DynamicObstacle:
    rect: Rect
    spawn_after_mapping: bool = True


@dataclass
class Scenario:
    name: str
    bounds_m: tuple[float, float]
    rooms: list[Room]
    doors: list[Door] = field(default_factory=list)
    objects: list[SceneObject] = field(default_factory=list)
    dynamic_obstacles: list[DynamicObstacle] = field(default_factory=list)
    start: Pose = Pose(0.0, 0.0, 0.0)
    tasks: list[Instruction] = field(default_factory=list)
    cell_size_m: float = 0.1

    def room(self, room_id: str) -> Room:
        for r in self.rooms:
            if r.id == room_id:
                return r
        raise KeyError(room_id)

    def object(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)

    def room_at(self, x: float, y: float) -> Room | None:
        for r in self.rooms:
            if _in_rect(r.rect, x, y):
                return r
        return None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cell_size_m": self.cell_size_m,
            "bounds_m": list(self.bounds_m),
            "rooms": [{"id": r.id, "label": r.label, "rect": list(r.rect)} for r in self.rooms],
            "doors": [
                {"id": d.id, "connects": list(d.connects), "position": list(d.position), "width_m": d.width_m}
                for d in self.doors
            ],
            "objects": [
                {"id": o.id, "label": o.label, "room": o.room, "rect": list(o.rect), "blocking": o.blocking}
                for o in self.objects
            ],
            "dynamic_obstacles": [
                {"rect": list(ob.rect), "spawn_after_mapping": ob.spawn_after_mapping}
                for ob in self.dynamic_obstacles
            ],
            "start": {"position": [self.start.x, self.start.y], "yaw_rad": self.start.yaw},
            "tasks": [t.to_dict() for t in self.tasks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            rooms = [Room(str(r["id"]), str(r["label"]), _rect(r["rect"])) for r in d["rooms"]]
            doors = [
                Door(str(o["id"]), _pair(o["connects"]), _point(o["position"]), float(o["width_m"]))
                for o in d.get("doors", [])
            ]
            objects = [
                SceneObject(str(o["id"]), str(o["label"]), str(o["room"]), _rect(o["rect"]), bool(o.get("blocking", False)))
                for o in d.get("objects", [])
            ]
            dyn = [
                DynamicObstacle(_rect(o["rect"]), bool(o.get("spawn_after_mapping", True)))
                for o in d.get("dynamic_obstacles", [])
            ]
            st = d["start"]
            start = Pose(*_point(st["position"]), float(st.get("yaw_rad", 0.0)))
            tasks = [Instruction.from_dict(t) for t in d.get("tasks", [])]
            bw, bh = d["bounds_m"]
            return cls(
                name=str(d.get("name", "")),
                bounds_m=(float(bw), float(bh)),
                rooms=rooms,
                doors=doors,
                objects=objects,
                dynamic_obstacles=dyn,
                start=start,
                tasks=tasks,
                cell_size_m=float(d.get("cell_size_m", 0.1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"malformed scenario: {exc!r}") from exc


def _rect(v) -> Rect:
    x0, y0, x1, y1 = (float(a) for a in v)
    if not (x1 > x0 and y1 > y0):
        raise ScenarioError(f"degenerate rectangle {list(v)}")
    return (x0, y0, x1, y1)


def _point(v) -> tuple[float, float]:
    vals = [float(a) for a in v]
    if len(vals) not in (2, 3):
        raise ScenarioError(f"bad point {v}")
    return (vals[0], vals[1])


def _pair(v) -> tuple[str, str]:
    a, b = v
    return (str(a), str(b))


def _in_rect(rect: Rect, x: float, y: float) -> bool:
    x0, y0, x1, y1 = rect
    return x0 - EPS <= x <= x1 + EPS and y0 - EPS <= y <= y1 + EPS


def _rect_inside(inner: Rect, outer: Rect) -> bool:
    return (inner[0] >= outer[0] - EPS and inner[1] >= outer[1] - EPS
            and inner[2] <= outer[2] + EPS and inner[3] <= outer[3] + EPS)


def shared_edge(a: Rect, b: Rect):
    """Common boundary segment of two touching rectangles.

    Returns ``("v", x, (ylo, yhi))`` or ``("h", y, (xlo, xhi))``, or None.
    """
    for xa, xb in ((a[2], b[0]), (a[0], b[2])):
        if abs(xa - xb) < EPS:
            lo, hi = max(a[1], b[1]), min(a[3], b[3])
            if hi - lo > EPS:
                return ("v", xa, (lo, hi))
    for ya, yb in ((a[3], b[1]), (a[1], b[3])):
        if abs(ya - yb) < EPS:
            lo, hi = max(a[0], b[0]), min(a[2], b[2])
            if hi - lo > EPS:
                return ("h", ya, (lo, hi))
    return None


def validate(s: Scenario) -> Scenario:
    """Check every scenario invariant; returns a copy with door axes filled in."""
    if not s.rooms:
        raise ScenarioError("no rooms")
    if s.cell_size_m <= 0:
        raise ScenarioError("cell_size_m must be positive")
    ids = [r.id for r in s.rooms]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate room id")
    for i, a in enumerate(s.rooms):
        for b in s.rooms[i + 1:]:
            ox = min(a.rect[2], b.rect[2]) - max(a.rect[0], b.rect[0])
            oy = min(a.rect[3], b.rect[3]) - max(a.rect[1], b.rect[1])
            if ox > EPS and oy > EPS:
                raise ScenarioError(f"rooms overlap: {a.id} and {b.id}")
    rooms = {r.id: r for r in s.rooms}
    doors = []
    for d in s.doors:
        ra, rb = d.connects
        if ra not in rooms or rb not in rooms or ra == rb:
            raise ScenarioError(f"door {d.id} connects unknown rooms {list(d.connects)}")
        if d.width_m < 0:
            raise ScenarioError(f"door {d.id} has negative width")
        edge = shared_edge(rooms[ra].rect, rooms[rb].rect)
        if edge is None:
            raise ScenarioError(f"door {d.id} joins rooms without a shared boundary")
        axis, c, (lo, hi) = edge
        along, across = (d.position[1], d.position[0]) if axis == "v" else (d.position[0], d.position[1])
        half = d.width_m / 2
        if abs(across - c) > EPS or along - half < lo - EPS or along + half > hi + EPS:
            raise ScenarioError(f"door {d.id} does not lie on the shared boundary of {ra} and {rb}")
        doors.append(replace(d, axis=axis))
    for o in s.objects:
        if o.room not in rooms:
            raise ScenarioError(f"object {o.id} references unknown room {o.room}")
        if not _rect_inside(o.rect, rooms[o.room].rect):
            raise ScenarioError(f"object {o.id} lies outside its room {o.room}")
    out = replace(s, doors=doors)
    grid = rasterize(out, include_dynamic=False)
    if grid.state_at(out.start.x, out.start.y) != FREE:
        raise ScenarioError("start position is not in free space")
    for t in out.tasks:
        t.validate()
    return out


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario JSON file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error: {exc}") from exc
    return validate(Scenario.from_dict(data))


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(s.to_json())


@dataclass
class OccupancyGrid:
    """Row-major grid; row index grows with y. ``origin`` is the lower-left
    corner of cell (0, 0) in world coordinates."""

    cells: np.ndarray
    cell_size_m: float
    origin: tuple[float, float]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cells.copy(), self.cell_size_m, self.origin)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        cs = self.cell_size_m
        return (int(math.floor((y - self.origin[1]) / cs)), int(math.floor((x - self.origin[0]) / cs)))

    def cell_to_world(self, row: int, col: int) -> tuple[float, float]:
        cs = self.cell_size_m
        return (self.origin[0] + (col + 0.5) * cs, self.origin[1] + (row + 0.5) * cs)

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def state_at(self, x: float, y: float) -> int:
        r, c = self.world_to_cell(x, y)
        if not self.in_bounds(r, c):
            return UNKNOWN
        return int(self.cells[r, c])

    def centers_x(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.width) + 0.5) * self.cell_size_m

    def centers_y(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.height) + 0.5) * self.cell_size_m

    def cells_of_points(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(pts, dtype=float)
        cs = self.cell_size_m
        cols = np.floor((pts[..., 0] - self.origin[0]) / cs).astype(np.int64)
        rows = np.floor((pts[..., 1] - self.origin[1]) / cs).astype(np.int64)
        return rows, cols

    def states_at(self, pts: np.ndarray) -> np.ndarray:
        rows, cols = self.cells_of_points(pts)
        ok = (rows >= 0) & (rows < self.height) & (cols >= 0) & (cols < self.width)
        out = np.full(rows.shape, UNKNOWN, dtype=np.int8)
        out[ok] = self.cells[rows[ok], cols[ok]]
        return out


def _rect_mask(xs: np.ndarray, ys: np.ndarray, rect: Rect, closed: bool = True):
    x0, y0, x1, y1 = rect
    if closed:
        mx = (xs >= x0 - EPS) & (xs <= x1 + EPS)
        my = (ys >= y0 - EPS) & (ys <= y1 + EPS)
    else:
        mx = (xs > x0 + EPS) & (xs < x1 - EPS)
        my = (ys > y0 + EPS) & (ys < y1 - EPS)
    return my[:, None] & mx[None, :]


def door_gap_mask(grid: OccupancyGrid, door: Door) -> np.ndarray:
    """Wall cells opened by a door: cells on the door's wall line whose whole
    extent lies within the door interval."""
    xs, ys = grid.centers_x(), grid.centers_y()
    half = door.width_m / 2 - grid.cell_size_m / 2 + EPS
    dx, dy = door.position
    if door.axis == "h":
        mx = np.abs(xs - dx) <= half
        my = np.abs(ys - dy) <= grid.cell_size_m / 2 - EPS
    else:
        mx = np.abs(xs - dx) <= grid.cell_size_m / 2 - EPS
        my = np.abs(ys - dy) <= half
    return my[:, None] & mx[None, :]


def empty_grid(s: Scenario) -> OccupancyGrid:
    cs = s.cell_size_m
    w = int(round(s.bounds_m[0] / cs)) + 3
    h = int(round(s.bounds_m[1] / cs)) + 3
    # cell centres fall on multiples of cs so walls sit centred on room edges
    return OccupancyGrid(np.full((h, w), UNKNOWN, dtype=np.int8), cs, (-1.5 * cs, -1.5 * cs))


def rasterize(s: Scenario, include_dynamic: bool = False, only_preexisting: bool = False) -> OccupancyGrid:
    """Ground-truth occupancy. ``only_preexisting`` restricts dynamic
    obstacles to those present during mapping."""
    grid = empty_grid(s)
    xs, ys = grid.centers_x(), grid.centers_y()
    cells = grid.cells
    for r in s.rooms:
        cells[_rect_mask(xs, ys, r.rect, closed=False)] = FREE
    for r in s.rooms:
        ring = _rect_mask(xs, ys, r.rect) & ~_rect_mask(xs, ys, r.rect, closed=False)
        cells[ring] = OCCUPIED
    for d in s.doors:
        cells[door_gap_mask(grid, d)] = FREE
    for o in s.objects:
        if o.blocking:
            cells[_rect_mask(xs, ys, o.rect)] = OCCUPIED
    if include_dynamic or only_preexisting:
        for ob in s.dynamic_obstacles:
            if include_dynamic or not ob.spawn_after_mapping:
                cells[_rect_mask(xs, ys, ob.rect)] = OCCUPIED
    return grid


@dataclass
class DepthScan:
    pose: Pose
    ranges: np.ndarray
    fov_rad: float = math.pi / 2
    max_range_m: float = 5.0

    @property
    def n_rays(self) -> int:
        return len(self.ranges)

    def bearings(self) -> np.ndarray:
        return ray_bearings(self.pose.yaw, self.fov_rad, self.n_rays)

    def endpoints(self, extra: float = 0.0) -> np.ndarray:
        b = self.bearings()
        r = self.ranges + extra
        return np.stack([self.pose.x + r * np.cos(b), self.pose.y + r * np.sin(b)], axis=-1)


def ray_bearings(yaw: float, fov: float, n: int) -> np.ndarray:
    if n == 1:
        return np.array([yaw])
    return yaw - fov / 2 + np.arange(n) * (fov / (n - 1))


def raycast(grid: OccupancyGrid, x: float, y: float, bearings: np.ndarray, max_range: float) -> np.ndarray:
    """Exact grid traversal: every cell-boundary crossing of every ray is
    generated up front, merged by distance (x crossings first on ties) and
    the first Occupied cell entered gives the range."""
    cs = grid.cell_size_m
    ox, oy = grid.origin
    bearings = np.asarray(bearings, dtype=float)
    dx, dy = np.cos(bearings), np.sin(bearings)
    col0 = math.floor((x - ox) / cs)
    row0 = math.floor((y - oy) / cs)
    k = np.arange(int(math.ceil(max_range / cs)) + 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_dx = np.where(dx != 0, cs / np.abs(dx), np.inf)
        t_dy = np.where(dy != 0, cs / np.abs(dy), np.inf)
        bx = np.where(dx > 0, ox + (col0 + 1) * cs, ox + col0 * cs)
        by = np.where(dy > 0, oy + (row0 + 1) * cs, oy + row0 * cs)
        t_mx = np.where(dx != 0, (bx - x) / dx, np.inf)
        t_my = np.where(dy != 0, (by - y) / dy, np.inf)
        tx = t_mx[:, None] + k[None, :] * t_dx[:, None]
        ty = t_my[:, None] + k[None, :] * t_dy[:, None]
    tx = np.where(np.isnan(tx), np.inf, tx)
    ty = np.where(np.isnan(ty), np.inf, ty)
    t = np.concatenate([tx, ty], axis=1)
    is_x = np.zeros(t.shape, dtype=bool)
    is_x[:, :len(k)] = True
    order = np.argsort(t, axis=1, kind="stable")
    t = np.take_along_axis(t, order, axis=1)
    is_x = np.take_along_axis(is_x, order, axis=1)
    nx = np.cumsum(is_x, axis=1)
    ny = np.cumsum(~is_x, axis=1)
    col = col0 + np.sign(dx).astype(np.int64)[:, None] * nx
    row = row0 + np.sign(dy).astype(np.int64)[:, None] * ny
    beyond = t >= max_range
    outside = (row < 0) | (row >= grid.height) | (col < 0) | (col >= grid.width)
    hit = np.zeros(t.shape, dtype=bool)
    ok = ~outside & ~beyond
    hit[ok] = grid.cells[row[ok], col[ok]] == OCCUPIED
    stop = hit | beyond | outside
    first = np.argmax(stop, axis=1)
    rows = np.arange(len(bearings))
    ranges = np.full(len(bearings), float(max_range))
    h = hit[rows, first] & stop[rows, first]
    ranges[h] = np.maximum(t[rows, first][h], 1e-9)
    return ranges


def simulate_depth(grid: OccupancyGrid, pose: Pose, fov: float = math.pi / 2, n_rays: int = 120,
                   max_range: float = 5.0) -> DepthScan:
    if grid.state_at(pose.x, pose.y) != FREE:
        raise ValueError(f"depth capture from non-free pose ({pose.x:.3f}, {pose.y:.3f})")
    b = ray_bearings(pose.yaw, fov, n_rays)
    return DepthScan(Pose(*pose), raycast(grid, pose.x, pose.y, b, max_range), fov, max_range)


@dataclass(frozen=True)
class RobotState:
    pose: Pose
    radius_m: float = 0.2
    max_speed_mps: float = 0.5
    max_yaw_rate_rps: float = 1.0
    sim_time_s: float = 0.0


def disc_collides(grid: OccupancyGrid, x: float, y: float, radius: float) -> bool:
    """True if a disc overlaps any Occupied cell (exact square-disc test)."""
    cs = grid.cell_size_m
    ox, oy = grid.origin
    c0 = max(int(math.floor((x - radius - ox) / cs)), 0)
    c1 = min(int(math.floor((x + radius - ox) / cs)), grid.width - 1)
    r0 = max(int(math.floor((y - radius - oy) / cs)), 0)
    r1 = min(int(math.floor((y + radius - oy) / cs)), grid.height - 1)
    if c1 < c0 or r1 < r0:
        return False
    block = grid.cells[r0:r1 + 1, c0:c1 + 1] == OCCUPIED
    if not block.any():
        return False
    rr, cc = np.nonzero(block)
    lx = ox + (cc + c0) * cs
    ly = oy + (rr + r0) * cs
    nx = np.clip(x, lx, lx + cs)
    ny = np.clip(y, ly, ly + cs)
    return bool(np.any((nx - x) ** 2 + (ny - y) ** 2 < radius * radius))


def step_robot(state: RobotState, v_mps: float, yaw_rate_rps: float, dt_s: float = 1 / 15,
               grid: OccupancyGrid | None = None) -> tuple[RobotState, bool]:
    """Unicycle step (midpoint heading). Translation is rejected on collision;
    rotation always applies."""
    x, y, yaw = state.pose
    mid = yaw + 0.5 * yaw_rate_rps * dt_s
    nx = x + v_mps * dt_s * math.cos(mid)
    ny = y + v_mps * dt_s * math.sin(mid)
    nyaw = _wrap(yaw + yaw_rate_rps * dt_s)
    collided = False
    if grid is not None and (nx != x or ny != y) and disc_collides(grid, nx, ny, state.radius_m):
        nx, ny, collided = x, y, True
    return replace(state, pose=Pose(nx, ny, nyaw), sim_time_s=state.sim_time_s + dt_s), collided


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def generate_scenario(n_rooms: int, room_size: tuple[float, float] = (4.0, 6.0), seed: int = 0,
                      extra_door_prob: float = 0.3, robot_radius: float = 0.2,
                      door_width: float = 0.9) -> Scenario:
    """Rooms grown on a grid skeleton; doors form a spanning tree plus extras."""
    if n_rooms < 2:
        raise ValueError("n_rooms >= 2 required")
    lo, hi = room_size
    if lo < 4 * 2 * robot_radius or hi < lo:
        raise ValueError(f"infeasible room size range {room_size}")
    rng = np.random.default_rng(seed)
    cells = [(0, 0)]
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    nbrs = ((1, 0), (-1, 0), (0, 1), (0, -1))
    while len(cells) < n_rooms:
        taken = set(cells)
        frontier = sorted({(c[0] + dx, c[1] + dy) for c in cells for dx, dy in nbrs} - taken)
        new = frontier[int(rng.integers(len(frontier)))]
        adj = [c for c in cells if abs(c[0] - new[0]) + abs(c[1] - new[1]) == 1]
        parent[new] = adj[int(rng.integers(len(adj)))]
        cells.append(new)
    min_c = min(c[0] for c in cells)
    min_r = min(c[1] for c in cells)
    cells = [(c[0] - min_c, c[1] - min_r) for c in cells]
    parent = {(k[0] - min_c, k[1] - min_r): (v[0] - min_c, v[1] - min_r) for k, v in parent.items()}
    n_cols = max(c[0] for c in cells) + 1
    n_rows = max(c[1] for c in cells) + 1
    # work in decimetres so every coordinate is an exact multiple of the cell size
    dlo, dhi = int(round(lo * 10)), int(round(hi * 10))
    widths = rng.integers(dlo, dhi + 1, size=n_cols)
    heights = rng.integers(dlo, dhi + 1, size=n_rows)
    xe = np.concatenate([[0], np.cumsum(widths)])
    ye = np.concatenate([[0], np.cumsum(heights)])
    index = {c: i for i, c in enumerate(cells)}
    labels = list(ROOM_LABELS)
    rng.shuffle(labels)

    def label(i: int) -> str:
        return labels[i] if i < len(labels) else f"{labels[i % len(labels)]} {i // len(labels) + 1}"

    rooms = []
    for i, (c, r) in enumerate(cells):
        rect = (xe[c] / 10, ye[r] / 10, xe[c + 1] / 10, ye[r + 1] / 10)
        rooms.append(Room(f"r{i}", label(i), tuple(float(v) for v in rect)))
    pairs = [(index[parent[c]], index[c]) for c in cells[1:]]
    tree = set(pairs)
    for i, a in enumerate(cells):
        for j in range(i + 1, len(cells)):
            b = cells[j]
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 and (i, j) not in tree and (j, i) not in tree:
                if rng.random() < extra_door_prob:
                    pairs.append((i, j))
    margin = int(round((door_width / 2 + 0.4) * 10))
    doors = []
    for k, (i, j) in enumerate(pairs):
        axis, c, (elo, ehi) = shared_edge(rooms[i].rect, rooms[j].rect)
        a0, a1 = int(round(elo * 10)) + margin, int(round(ehi * 10)) - margin
        along = int(rng.integers(a0, a1 + 1)) / 10
        pos = (c, along) if axis == "v" else (along, c)
        doors.append(Door(f"d{k}", (rooms[i].id, rooms[j].id), (float(pos[0]), float(pos[1])), door_width, axis))
    objects = []
    tasks = []
    for i, room in enumerate(rooms):
        lab = OBJECT_LABELS[int(rng.integers(len(OBJECT_LABELS)))]
        size = int(rng.integers(10, 13)) / 10
        x0, y0, x1, y1 = (int(round(v * 10)) for v in room.rect)
        m = int(round((size / 2 + 0.6) * 10))
        cx = int(rng.integers(x0 + m, x1 - m + 1)) / 10
        cy = int(rng.integers(y0 + m, y1 - m + 1)) / 10
        rect = (round(cx - size / 2, 2), round(cy - size / 2, 2), round(cx + size / 2, 2), round(cy + size / 2, 2))
        oid = f"{lab.replace(' ', '_')}_{i}"
        objects.append(SceneObject(oid, lab, room.id, rect, False))
        tasks.append(Instruction.text(lab, room.label))
    x0, y0, x1, y1 = (int(round(v * 10)) for v in rooms[0].rect)
    sx = int(rng.integers(x0 + 6, x1 - 6 + 1)) / 10
    sy = int(rng.integers(y0 + 6, y1 - 6 + 1)) / 10
    syaw = round(float(rng.uniform(-math.pi, math.pi)), 4)
    s = Scenario(
        name=f"gen_n{n_rooms}_s{seed}",
        bounds_m=(float(xe[-1] / 10), float(ye[-1] / 10)),
        rooms=rooms,
        doors=doors,
        objects=objects,
        start=Pose(sx, sy, syaw),
        tasks=tasks,
    )
    return s


def door_graph_connected(s: Scenario) -> bool:
    adj: dict[str, set[str]] = {r.id: set() for r in s.rooms}
    for d in s.doors:
        if d.width_m > 0:
            adj[d.connects[0]].add(d.connects[1])
            adj[d.connects[1]].add(d.connects[0])
    seen = {s.rooms[0].id}
    todo = [s.rooms[0].id]
    while todo:
        for nb in adj[todo.pop()]:
            if nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(s.rooms)

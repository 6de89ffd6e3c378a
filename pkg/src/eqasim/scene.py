"""Immutable grid-world scenes, agent kinematics and first-person rendering."""

import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .errors import BlockedPathError, SceneInvariantError, SceneParseError
from .grid import connected_components, segment_clear, shortest_cell_path, traverse

TWO_PI = 2.0 * math.pi

DEFAULT_FOV = math.pi / 2
DEFAULT_MAX_RANGE = 10.0
DEFAULT_RAYS = 64
DEFAULT_TRANSLATION_CAP = 3.0

Cell = tuple  # (row, col)


def wrap_angle(theta):
    """Map an angle to ``[0, 2*pi)``."""
    out = theta % TWO_PI
    return 0.0 if out >= TWO_PI else out


@dataclass(frozen=True)
class Room:
    name: str
    cells: frozenset


@dataclass(frozen=True)
class SceneObject:
    label: str
    cells: frozenset
    room: str
    attributes: Mapping[str, str] = field(default_factory=dict)

    def describe(self):
        attrs = " ".join(self.attributes[k] for k in sorted(self.attributes))
        return f"{attrs} {self.label}".strip()


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    kind: str  # "multiple_choice" | "open_ended"
    ground_truth: str
    annotated_regions: tuple
    annotated_targets: tuple  # ((label, room), ...)
    gt_trajectory_length_m: float
    requires_exhaustive: bool = False
    options: Mapping[str, str] = field(default_factory=dict)
    start: Cell = (0, 0)
    start_heading: float = 0.0
    goals: tuple = ()

    @property
    def is_multiple_choice(self):
        return self.kind == "multiple_choice"


@dataclass(frozen=True, eq=False)
class Scene:
    free: np.ndarray  # bool [rows, cols]; read-only
    cell_size: float
    rooms: tuple
    objects: tuple
    questions: tuple
    generator: Optional[Mapping] = None
    room_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        index = np.full(self.free.shape, -1, dtype=np.int32)
        for i, room in enumerate(self.rooms):
            for r, c in room.cells:
                index[r, c] = i
        index.flags.writeable = False
        object.__setattr__(self, "room_index", index)

    @property
    def shape(self):
        return self.free.shape

    @property
    def free_cell_count(self):
        return int(self.free.sum())

    @property
    def room_size_m2(self):
        return self.free_cell_count * self.cell_size ** 2

    @property
    def room_names(self):
        return [room.name for room in self.rooms]

    def room(self, name):
        for room in self.rooms:
            if room.name == name:
                return room
        raise KeyError(name)

    def question(self, qid):
        for q in self.questions:
            if q.id == qid:
                return q
        raise KeyError(qid)

    def cell_of(self, x, y):
        return (math.floor(y / self.cell_size), math.floor(x / self.cell_size))

    def cell_center(self, cell):
        r, c = cell
        return ((c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size)

    def is_free_cell(self, cell):
        r, c = cell
        h, w = self.free.shape
        return 0 <= r < h and 0 <= c < w and bool(self.free[r, c])

    def room_at_cell(self, cell):
        if not self.is_free_cell(cell):
            return None
        i = self.room_index[cell]
        return self.rooms[i].name if i >= 0 else None

    def room_at(self, x, y):
        return self.room_at_cell(self.cell_of(x, y))

    def objects_matching(self, label, room=None):
        return [o for o in self.objects if o.label == label and (room is None or o.room == room)]


@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    heading: float = 0.0
    step_count: int = 0
    distance_traveled_m: float = 0.0

    @property
    def position(self):
        return (self.x, self.y)

    def to_dict(self):
        return {
            "x": self.x,
            "y": self.y,
            "heading": self.heading,
            "step_count": self.step_count,
            "distance_traveled_m": self.distance_traveled_m,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["x"], d["y"], d["heading"], d["step_count"], d["distance_traveled_m"])


def start_state(scene, question):
    x, y = scene.cell_center(question.start)
    return AgentState(x, y, wrap_angle(question.start_heading))


@dataclass(frozen=True)
class Observation:
    id: int
    pose: AgentState
    depth_rays: tuple  # ((angle_offset, hit_distance_m, kind), ...)
    visible_cells: frozenset
    visible_objects: tuple  # ((label, room, fraction), ...)
    visible_rooms: tuple  # ((room, fraction), ...)

    def object_fraction(self, label, room=None):
        best = 0.0
        for lab, rm, frac in self.visible_objects:
            if lab == label and (room is None or rm == room):
                best = max(best, frac)
        return best

    def summary(self):
        """One-line textual serialization used in answerer prompts."""
        rooms = ", ".join(f"{name} {frac:.0%}" for name, frac in self.visible_rooms) or "nothing"
        objs = ", ".join(f"{label} in {room} ({frac:.0%} visible)"
                         for label, room, frac in self.visible_objects) or "none"
        return (f"view {self.id} at ({self.pose.x:.2f}, {self.pose.y:.2f}) heading "
                f"{math.degrees(self.pose.heading):.0f} deg; rooms: {rooms}; objects: {objs}")


def ray_offsets(fov, rays):
    if rays < 2:
        raise ValueError("rays must be >= 2")
    step = fov / (rays - 1)
    return [-fov / 2 + i * step for i in range(rays)]


def render_observation(scene, state, fov=DEFAULT_FOV, max_range=DEFAULT_MAX_RANGE,
                       rays=DEFAULT_RAYS, obs_id=0):
    """Cast ``rays`` DDA rays across ``fov`` and derive semantic visibility."""
    cs = scene.cell_size
    free = scene.free
    h, w = free.shape
    px, py = state.x / cs, state.y / cs
    t_max = max_range / cs
    depth = []
    seen_free = set()
    seen_walls = set()
    for offset in ray_offsets(fov, rays):
        theta = state.heading + offset
        dx, dy = math.cos(theta), math.sin(theta)
        hit = None
        for r, c, t, corner in traverse(px, py, dx, dy, t_max):
            if corner is not None:
                (r1, c1), (r2, c2) = corner
                if not _free(free, h, w, r1, c1) and not _free(free, h, w, r2, c2):
                    hit = (t, (r1, c1))
                    break
            if not _free(free, h, w, r, c):
                hit = (t, (r, c))
                break
            seen_free.add((r, c))
        if hit is None:
            depth.append((offset, max_range, "none"))
        else:
            t, cell = hit
            depth.append((offset, t * cs, "wall"))
            if 0 <= cell[0] < h and 0 <= cell[1] < w:
                seen_walls.add(cell)

    counts = {}
    for cell in seen_free:
        i = scene.room_index[cell]
        if i >= 0:
            counts[i] = counts.get(i, 0) + 1
    total = sum(counts.values())
    visible_rooms = tuple(sorted(
        (scene.rooms[i].name, n / total) for i, n in counts.items()))
    visible_objects = []
    for obj in scene.objects:
        n = len(obj.cells & seen_free)
        if n:
            visible_objects.append((obj.label, obj.room, n / len(obj.cells)))
    visible_objects.sort()
    return Observation(
        id=obs_id,
        pose=state,
        depth_rays=tuple(depth),
        visible_cells=frozenset(seen_free | seen_walls),
        visible_objects=tuple(visible_objects),
        visible_rooms=visible_rooms,
    )


def _free(free, h, w, r, c):
    return 0 <= r < h and 0 <= c < w and free[r, c]


# -- actions -----------------------------------------------------------------

@dataclass(frozen=True)
class Rotate:
    delta: float

    def to_dict(self):
        return {"type": "rotate", "delta": self.delta}


@dataclass(frozen=True)
class TranslateToward:
    waypoint: tuple  # (x, y) meters

    def to_dict(self):
        return {"type": "translate", "waypoint": list(self.waypoint)}


def plan_polyline(scene, start, goal):
    """Collision-free polyline (meters) from ``start`` to ``goal``.

    Follows the 8-connected grid shortest path, shortcut greedily wherever the
    straight segment stays in free space.
    """
    cs = scene.cell_size
    s_cell = scene.cell_of(*start)
    g_cell = scene.cell_of(*goal)
    if not scene.is_free_cell(g_cell):
        raise BlockedPathError(f"waypoint {goal} lies in a wall cell")
    cells = shortest_cell_path(scene.free, s_cell, g_cell)
    if cells is None:
        raise BlockedPathError(f"no free path from {s_cell} to {g_cell}")
    pts = [(start[0] / cs, start[1] / cs)]
    pts += [(c + 0.5, r + 0.5) for r, c in cells[1:-1]]
    pts.append((goal[0] / cs, goal[1] / cs))
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = i + 1
        while j + 1 < len(pts) and segment_clear(scene.free, pts[i], pts[j + 1]):
            j += 1
        out.append(pts[j])
        i = j
    return [(x * cs, y * cs) for x, y in out]


def walk_polyline(points, budget):
    """Advance along ``points`` by at most ``budget`` meters.

    Returns ``(end_point, distance_walked, last_direction)``.
    """
    pos = points[0]
    walked = 0.0
    direction = None
    for a, b in zip(points, points[1:]):
        seg = math.hypot(b[0] - a[0], b[1] - a[1])
        if seg == 0.0:
            continue
        direction = math.atan2(b[1] - a[1], b[0] - a[0])
        remaining = budget - walked
        if seg <= remaining:
            pos = b
            walked += seg
        else:
            f = remaining / seg
            pos = (a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f)
            walked = budget
            break
    return pos, walked, direction


def apply_action(scene, state, action, translation_cap=DEFAULT_TRANSLATION_CAP):
    """Apply one discrete action; every action costs exactly one step.

    Translation follows :func:`plan_polyline`, is clipped to ``translation_cap``
    meters, and leaves the agent facing its last direction of travel.
    """
    if isinstance(action, Rotate):
        return replace(state, heading=wrap_angle(state.heading + action.delta),
                       step_count=state.step_count + 1)
    if isinstance(action, TranslateToward):
        points = plan_polyline(scene, state.position, tuple(action.waypoint))
        pos, walked, direction = walk_polyline(points, translation_cap)
        if not scene.is_free_cell(scene.cell_of(*pos)):
            # numerical edge: fall back to the last fully walked vertex
            pos, walked, direction = _last_vertex_within(points, translation_cap)
        heading = state.heading if direction is None else wrap_angle(direction)
        return AgentState(pos[0], pos[1], heading, state.step_count + 1,
                          state.distance_traveled_m + walked)
    raise TypeError(f"unknown action {action!r}")


def _last_vertex_within(points, budget):
    walked = 0.0
    pos, direction = points[0], None
    for a, b in zip(points, points[1:]):
        seg = math.hypot(b[0] - a[0], b[1] - a[1])
        if walked + seg > budget:
            break
        walked += seg
        pos = b
        if seg:
            direction = math.atan2(b[1] - a[1], b[0] - a[0])
    return pos, walked, direction


# -- scene documents ---------------------------------------------------------

def _cells(value, where):
    if not isinstance(value, list) or not value:
        raise SceneParseError("expected a nonempty list of [row, col]", field=where)
    out = []
    for i, item in enumerate(value):
        if (not isinstance(item, list) or len(item) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in item)):
            raise SceneParseError("expected [row, col] integer pair", field=f"{where}[{i}]")
        out.append((item[0], item[1]))
    return out


def _require(doc, key, kind, where):
    if key not in doc:
        raise SceneParseError("missing field", field=f"{where}{key}")
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise SceneParseError(f"expected {kind.__name__}", field=f"{where}{key}")
    return value


def load_scene(document):
    """Parse a scene document (JSON text or bytes) and check every invariant."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SceneParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise SceneParseError("top level must be an object")
    return scene_from_dict(doc)


def scene_from_dict(doc):
    grid = _require(doc, "grid", list, "")
    if not grid or not all(isinstance(row, str) for row in grid):
        raise SceneParseError("expected a nonempty list of strings", field="grid")
    width = len(grid[0])
    for i, row in enumerate(grid):
        if len(row) != width:
            raise SceneParseError("ragged grid row", field=f"grid[{i}]")
        bad = set(row) - {"#", "."}
        if bad:
            raise SceneParseError(f"unknown cell kinds {sorted(bad)}", field=f"grid[{i}]")
    free = np.array([[ch == "." for ch in row] for row in grid], dtype=bool)
    free.flags.writeable = False
    cell_size = _require(doc, "cell_size", float, "")
    if cell_size <= 0:
        raise SceneParseError("must be positive", field="cell_size")

    rooms_doc = _require(doc, "rooms", dict, "")
    rooms = []
    for name, cells in rooms_doc.items():
        rooms.append(Room(name, frozenset(_cells(cells, f"rooms.{name}"))))

    objects = []
    for i, od in enumerate(_require(doc, "objects", list, "")):
        where = f"objects[{i}]."
        if not isinstance(od, dict):
            raise SceneParseError("expected an object", field=f"objects[{i}]")
        attrs = od.get("attributes", {})
        if not isinstance(attrs, dict) or not all(isinstance(v, str) for v in attrs.values()):
            raise SceneParseError("expected a string map", field=where + "attributes")
        objects.append(SceneObject(
            label=_require(od, "label", str, where),
            cells=frozenset(_cells(od.get("cells"), where + "cells")),
            room=_require(od, "room", str, where),
            attributes=dict(attrs),
        ))

    questions = []
    for i, qd in enumerate(doc.get("questions", [])):
        where = f"questions[{i}]."
        if not isinstance(qd, dict):
            raise SceneParseError("expected an object", field=f"questions[{i}]")
        targets = []
        for j, t in enumerate(_require(qd, "annotated_targets", list, where)):
            if not (isinstance(t, list) and len(t) == 2 and all(isinstance(v, str) for v in t)):
                raise SceneParseError("expected [label, room]",
                                      field=f"{where}annotated_targets[{j}]")
            targets.append((t[0], t[1]))
        regions = _require(qd, "annotated_regions", list, where)
        if not all(isinstance(v, str) for v in regions):
            raise SceneParseError("expected strings", field=where + "annotated_regions")
        options = qd.get("options", {})
        if not isinstance(options, dict):
            raise SceneParseError("expected an object", field=where + "options")
        start = _cells([qd.get("start")], where + "start")[0] if "start" in qd else (0, 0)
        goals = tuple(_cells(qd["goals"], where + "goals")) if qd.get("goals") else ()
        questions.append(Question(
            id=str(_require(qd, "id", str, where)),
            text=_require(qd, "text", str, where),
            kind=_require(qd, "kind", str, where),
            ground_truth=_require(qd, "ground_truth", str, where),
            annotated_regions=tuple(regions),
            annotated_targets=tuple(targets),
            gt_trajectory_length_m=_require(qd, "gt_trajectory_length_m", float, where),
            requires_exhaustive=bool(qd.get("requires_exhaustive", False)),
            options=dict(options),
            start=start,
            start_heading=float(qd.get("start_heading", 0.0)),
            goals=goals,
        ))
    generator = doc.get("generator")
    scene = Scene(free, cell_size, tuple(rooms), tuple(objects), tuple(questions),
                  dict(generator) if isinstance(generator, dict) else None)
    validate_scene(scene)
    return scene


def validate_scene(scene):
    """Raise :class:`SceneInvariantError` naming the first failed invariant."""
    h, w = scene.free.shape
    names = [room.name for room in scene.rooms]
    if len(set(names)) != len(names):
        raise SceneInvariantError("room names are unique")
    covered = set()
    for room in scene.rooms:
        if not room.name:
            raise SceneInvariantError("room name nonempty")
        for r, c in room.cells:
            if not (0 <= r < h and 0 <= c < w) or not scene.free[r, c]:
                raise SceneInvariantError("room cells are free cells", f"{room.name} {(r, c)}")
        if covered & room.cells:
            raise SceneInvariantError("room regions pairwise disjoint", room.name)
        covered |= room.cells
        if len(connected_components(room.cells)) != 1:
            raise SceneInvariantError("room cells 4-connected", room.name)
    free_cells = {(int(r), int(c)) for r, c in zip(*np.nonzero(scene.free))}
    if covered != free_cells:
        raise SceneInvariantError("rooms cover all free cells",
                                  f"{len(free_cells - covered)} uncovered")
    rooms = {room.name: room for room in scene.rooms}
    for obj in scene.objects:
        if not obj.label:
            raise SceneInvariantError("object label nonempty")
        if not all(obj.attributes.values()):
            raise SceneInvariantError("object attribute values nonempty", obj.label)
        if obj.room not in rooms:
            raise SceneInvariantError("object room exists", f"{obj.label} -> {obj.room}")
        if not obj.cells <= rooms[obj.room].cells:
            raise SceneInvariantError("object inside exactly one room", obj.label)
    seen_ids = set()
    for q in scene.questions:
        if q.id in seen_ids:
            raise SceneInvariantError("question ids unique", q.id)
        seen_ids.add(q.id)
        if q.kind not in ("multiple_choice", "open_ended"):
            raise SceneInvariantError("question kind known", q.kind)
        if q.kind == "multiple_choice" and (not q.options or q.ground_truth not in q.options):
            raise SceneInvariantError("multiple choice ground truth is an option letter", q.id)
        if not q.annotated_targets:
            raise SceneInvariantError("annotated targets nonempty", q.id)
        for label, room in q.annotated_targets:
            if not scene.objects_matching(label, room):
                raise SceneInvariantError("annotated target resolvable", f"{q.id}: {label}/{room}")
        for region in q.annotated_regions:
            if region not in rooms:
                raise SceneInvariantError("annotated region exists", f"{q.id}: {region}")
        if q.gt_trajectory_length_m < 0:
            raise SceneInvariantError("gt trajectory length nonnegative", q.id)
        if not scene.is_free_cell(q.start):
            raise SceneInvariantError("question start is free", q.id)
        for g in q.goals:
            if not scene.is_free_cell(g):
                raise SceneInvariantError("question goals are free", q.id)


def scene_to_dict(scene):
    grid = ["".join("." if v else "#" for v in row) for row in scene.free]
    doc = {}
    if scene.generator is not None:
        doc["generator"] = dict(scene.generator)
    doc["cell_size"] = scene.cell_size
    doc["grid"] = grid
    doc["rooms"] = {room.name: [list(c) for c in sorted(room.cells)] for room in scene.rooms}
    doc["objects"] = [
        {"label": o.label, "room": o.room, "cells": [list(c) for c in sorted(o.cells)],
         "attributes": dict(sorted(o.attributes.items()))}
        for o in scene.objects
    ]
    doc["questions"] = [question_to_dict(q) for q in scene.questions]
    return doc


def question_to_dict(q):
    d = {
        "id": q.id,
        "text": q.text,
        "kind": q.kind,
        "ground_truth": q.ground_truth,
        "annotated_regions": list(q.annotated_regions),
        "annotated_targets": [list(t) for t in q.annotated_targets],
        "gt_trajectory_length_m": q.gt_trajectory_length_m,
        "requires_exhaustive": q.requires_exhaustive,
        "start": list(q.start),
        "start_heading": q.start_heading,
    }
    if q.options:
        d["options"] = dict(sorted(q.options.items()))
    if q.goals:
        d["goals"] = [list(g) for g in q.goals]
    return d


def dump_scene(scene):
    """Serialize to the scene document format; stable byte-for-byte."""
    return dumps_compact(scene_to_dict(scene)) + "\n"


def dumps_compact(obj, indent=0):
    """Pretty JSON where lists of scalars or short pairs stay on one line."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {dumps_compact(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if all(not isinstance(v, (dict, list)) for v in obj) or all(
                isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v)
                for v in obj):
            if obj and all(isinstance(v, str) for v in obj) and len(obj) > 1 and len(
                    json.dumps(obj)) > 80:
                rows = [f"{inner}{json.dumps(v)}" for v in obj]
                return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
            return json.dumps(obj)
        items = [f"{inner}{dumps_compact(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return json.dumps(obj)

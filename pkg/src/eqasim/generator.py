"""Seeded procedural floor plans with annotated questions.

Layouts come from binary space partitioning of a walled rectangle. Rooms are
the leaves, separated by one-cell walls. A random spanning tree over adjacent
rooms gets one-cell doors, so every room is reachable.
"""

import itertools
import json
import math
import os
import random

import numpy as np

from .errors import GenerationError
from .grid import uniform_cost_search
from .scene import Question, Room, Scene, SceneObject, dump_scene, validate_scene

GENERATOR_VERSION = 1

ROOM_NAMES = (
    "kitchen", "living room", "dining room", "master bedroom", "guest bedroom",
    "bathroom", "office", "laundry room", "hallway", "pantry", "nursery", "garage",
)

ROOM_OBJECTS = {
    "kitchen": ("tap", "fridge", "kettle", "oven", "toaster"),
    "living room": ("sofa", "television", "armchair", "rug", "lamp"),
    "dining room": ("table", "chair", "vase", "cabinet"),
    "master bedroom": ("bed", "bedsheet", "wardrobe", "pillow", "lamp"),
    "guest bedroom": ("bed", "bedsheet", "desk", "pillow"),
    "bathroom": ("towel", "sink", "mirror", "bathtub"),
    "office": ("desk", "chair", "bookshelf", "monitor"),
    "laundry room": ("washing machine", "basket", "iron"),
    "hallway": ("coat rack", "shoe rack", "painting"),
    "pantry": ("shelf", "jar", "basket"),
    "nursery": ("crib", "toy box", "rug"),
    "garage": ("bicycle", "toolbox", "car"),
}

COLORS = ("red", "blue", "green", "yellow", "white", "black", "brown", "gray")

QUESTION_KINDS = ("mc_single", "mc_multi", "open_ended", "counting")
DEFAULT_MIX = {"mc_single": 0.4, "mc_multi": 0.25, "open_ended": 0.2, "counting": 0.15}

MIN_ROOM = 3  # interior cells per side
MAX_ATTEMPTS = 50


def _split(rect, rng):
    """Split ``(r0, c0, r1, c1)`` (inclusive interior) across a wall line, or None."""
    r0, c0, r1, c1 = rect
    h, w = r1 - r0 + 1, c1 - c0 + 1
    axes = []
    if h >= 2 * MIN_ROOM + 1:
        axes.append("row")
    if w >= 2 * MIN_ROOM + 1:
        axes.append("col")
    if not axes:
        return None
    if len(axes) == 2:
        axis = "row" if h > w else "col" if w > h else rng.choice(axes)
    else:
        axis = axes[0]
    if axis == "row":
        k = rng.randint(r0 + MIN_ROOM, r1 - MIN_ROOM)
        return (r0, c0, k - 1, c1), (k + 1, c0, r1, c1)
    k = rng.randint(c0 + MIN_ROOM, c1 - MIN_ROOM)
    return (r0, c0, r1, k - 1), (r0, k + 1, r1, c1)


def _area(rect):
    return (rect[2] - rect[0] + 1) * (rect[3] - rect[1] + 1)


def layout(rows, cols, n_rooms, rng):
    """Room rectangles for a ``rows x cols`` grid; may return fewer than asked."""
    leaves = [(1, 1, rows - 2, cols - 2)]
    while len(leaves) < n_rooms:
        order = sorted(range(len(leaves)), key=lambda i: (-_area(leaves[i]), leaves[i]))
        for i in order:
            parts = _split(leaves[i], rng)
            if parts is not None:
                leaves[i:i + 1] = list(parts)
                break
        else:
            break
    return leaves


def _door_candidates(label):
    """``{(a, b): [wall cells]}`` for wall cells separating rooms ``a < b``."""
    h, w = label.shape
    out = {}
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            if label[r, c] != -1:
                continue
            for (ar, ac), (br, bc), (pr, pc), (qr, qc) in (
                    ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)),
                    ((r, c - 1), (r, c + 1), (r - 1, c), (r + 1, c))):
                a, b = label[ar, ac], label[br, bc]
                if a >= 0 and b >= 0 and a != b and label[pr, pc] == -1 and label[qr, qc] == -1:
                    out.setdefault((min(a, b), max(a, b)), []).append((r, c))
    return out


def build_floorplan(rows, cols, n_rooms, rng, extra_door_p=0.25):
    """Free mask plus one cell set per room (door cells included)."""
    rects = layout(rows, cols, n_rooms, rng)
    label = np.full((rows, cols), -1, dtype=np.int32)
    for i, (r0, c0, r1, c1) in enumerate(rects):
        label[r0:r1 + 1, c0:c1 + 1] = i
    candidates = _door_candidates(label)
    # random spanning tree over the adjacency graph (Kruskal on shuffled edges)
    edges = sorted(candidates)
    rng.shuffle(edges)
    parent = list(range(len(rects)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    doors = []
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            doors.append((a, b))
        elif rng.random() < extra_door_p:
            doors.append((a, b))
    if len({find(i) for i in range(len(rects))}) != 1:
        raise GenerationError("rooms are not connected")
    cells = [set() for _ in rects]
    for i in range(len(rects)):
        for r, c in zip(*np.nonzero(label == i)):
            cells[i].add((int(r), int(c)))
    for a, b in doors:
        door = rng.choice(sorted(candidates[(a, b)]))
        cells[a if rng.random() < 0.5 else b].add(door)
        label[door] = -2
    free = np.zeros((rows, cols), dtype=bool)
    for group in cells:
        for cell in group:
            free[cell] = True
    return free, cells


def _place_objects(rng, room_name, interior, taken, per_room):
    vocab = ROOM_OBJECTS.get(room_name, ("box",))
    labels = rng.sample(vocab, min(per_room, len(vocab)))
    objects = []
    for label in labels:
        spots = sorted(interior - taken)
        if not spots:
            break
        cell = rng.choice(spots)
        group = {cell}
        if rng.random() < 0.5:
            r, c = cell
            nbrs = [n for n in ((r, c + 1), (r + 1, c)) if n in interior and n not in taken]
            if nbrs:
                group.add(rng.choice(nbrs))
        taken |= group
        objects.append(SceneObject(label, frozenset(group), room_name,
                                   {"color": rng.choice(COLORS)}))
    return objects


def _options(rng, truth, distractors):
    pool = [d for d in distractors if d != truth]
    picks = rng.sample(pool, 3) + [truth]
    rng.shuffle(picks)
    letters = "ABCD"
    options = {letters[i]: v for i, v in enumerate(picks)}
    return options, letters[picks.index(truth)]


def _pick_kind(rng, mix):
    kinds = [k for k in QUESTION_KINDS if mix.get(k, 0) > 0]
    return rng.choices(kinds, weights=[mix[k] for k in kinds])[0]


def _unique_objects(objects):
    counts = {}
    for o in objects:
        counts[(o.label, o.room)] = counts.get((o.label, o.room), 0) + 1
    return [o for o in objects if counts[(o.label, o.room)] == 1]


def make_question(rng, qid, kind, objects, room_names):
    """Question fields ``(text, kind, truth, regions, targets, exhaustive, options)``."""
    unique = _unique_objects(objects)
    if kind == "mc_multi":
        rooms = sorted({o.room for o in unique})
        if len(rooms) < 2:
            kind = "mc_single"
        else:
            ra, rb = rng.sample(rooms, 2)
            a = rng.choice([o for o in unique if o.room == ra])
            b = rng.choice([o for o in unique if o.room == rb])
            truth = f"{a.attributes['color']} and {b.attributes['color']}"
            pairs = [f"{x} and {y}" for x in COLORS for y in COLORS]
            options, letter = _options(rng, truth, pairs)
            text = (f"What colors are the {a.label} in the {a.room} "
                    f"and the {b.label} in the {b.room}?")
            return (text, "multiple_choice", letter, (a.room, b.room),
                    ((a.label, a.room), (b.label, b.room)), False, options)
    if kind == "counting":
        labels = sorted({o.label for o in objects})
        label = rng.choice(labels)
        found = sorted({(o.label, o.room) for o in objects if o.label == label},
                       key=lambda t: t[1])
        n = sum(1 for o in objects if o.label == label)
        options, letter = _options(rng, str(n), [str(i) for i in range(1, 9)])
        text = f"How many {label} items are there in the home?"
        return (text, "multiple_choice", letter, tuple(r for _, r in found), tuple(found),
                True, options)
    o = rng.choice(unique)
    text = f"What color is the {o.label} in the {o.room}?"
    if kind == "open_ended":
        return (text, "open_ended", o.attributes["color"], (o.room,), ((o.label, o.room),),
                False, {})
    options, letter = _options(rng, o.attributes["color"], COLORS)
    return text, "multiple_choice", letter, (o.room,), ((o.label, o.room),), False, options


def shortest_tour(free, start, goal_sets, cell_size=1.0):
    """Length and cell order of the shortest walk from ``start`` visiting one cell per set.

    Brute force over visiting orders and cell choices, using cached distance
    fields; fine for the handful of targets a question names.
    """
    fields = {}

    def field(cell):
        if cell not in fields:
            fields[cell] = uniform_cost_search(free, cell)[0]
        return fields[cell]

    best = (math.inf, ())
    for order in itertools.permutations(range(len(goal_sets))):
        for choice in itertools.product(*(sorted(goal_sets[i]) for i in order)):
            total, here = 0.0, start
            for cell in choice:
                total += field(here)[cell]
                here = cell
                if total >= best[0]:
                    break
            if total < best[0]:
                best = (total, choice)
    return best[0] * cell_size, best[1]


def generate_scene(seed, rows=(12, 18), cols=(12, 22), rooms=(3, 5), questions=1,
                   mix=None, cell_size=1.0, objects_per_room=(1, 3), scene_id=None):
    """One validated scene with ``questions`` annotated questions, deterministic in ``seed``."""
    mix = dict(DEFAULT_MIX if mix is None else mix)
    if not any(mix.get(k, 0) > 0 for k in QUESTION_KINDS):
        raise ValueError("question mix has no positive weight")
    rows, cols, rooms = tuple(rows), tuple(cols), tuple(rooms)
    objects_per_room = tuple(objects_per_room)
    for (lo, hi), what in ((rows, "rows"), (cols, "cols"), (rooms, "rooms")):
        if lo > hi:
            raise ValueError(f"empty {what} range")
    rng = random.Random(seed)
    problems = []
    for attempt in range(MAX_ATTEMPTS):
        h, w = rng.randint(*rows), rng.randint(*cols)
        n_rooms = rng.randint(*rooms)
        try:
            free, room_cells = build_floorplan(h, w, n_rooms, rng)
        except GenerationError as exc:
            problems.append(f"attempt {attempt}: {exc}")
            continue
        if len(room_cells) < rooms[0]:
            problems.append(f"attempt {attempt}: {len(room_cells)} rooms in {h}x{w}")
            continue
        return _populate(rng, seed, free, room_cells, questions, mix, cell_size,
                         objects_per_room, scene_id)
    raise GenerationError("layout constraints unmet after "
                          f"{MAX_ATTEMPTS} attempts: " + "; ".join(problems[-3:]))


def _populate(rng, seed, free, room_cells, n_questions, mix, cell_size, per_room, scene_id):
    names = rng.sample(ROOM_NAMES, len(room_cells))
    rooms = tuple(Room(n, frozenset(c)) for n, c in zip(names, room_cells))
    objects = []
    taken = set()
    for room in rooms:
        h, w = free.shape
        interior = {(r, c) for r, c in room.cells
                    if all(free[r + dr, c + dc] for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)))}
        objects += _place_objects(rng, room.name, interior or set(room.cells), taken,
                                  rng.randint(*per_room))
    scene_id = scene_id or f"scene-{seed}"
    questions = []
    for i in range(n_questions):
        kind = _pick_kind(rng, mix)
        text, qkind, truth, regions, targets, exhaustive, options = make_question(
            rng, f"{scene_id}-q{i}", kind, objects, names)
        outside = sorted(c for room in rooms if room.name not in regions for c in room.cells)
        start = rng.choice(outside or sorted(c for room in rooms for c in room.cells))
        goal_sets = [set().union(*(o.cells for o in objects if (o.label, o.room) == t))
                     for t in targets]
        length, goals = shortest_tour(free, start, goal_sets, cell_size)
        questions.append(Question(
            id=f"{scene_id}-q{i}", text=text, kind=qkind, ground_truth=truth,
            annotated_regions=tuple(dict.fromkeys(regions)), annotated_targets=targets,
            gt_trajectory_length_m=round(length, 9), requires_exhaustive=exhaustive,
            options=options, start=start, start_heading=rng.randrange(8) * math.pi / 4,
            goals=tuple(goals)))
    free = free.copy()
    free.flags.writeable = False
    scene = Scene(free, float(cell_size), rooms, tuple(objects), tuple(questions),
                  {"seed": seed, "version": GENERATOR_VERSION, "id": scene_id})
    validate_scene(scene)
    return scene


def corpus_seeds(seed, n_scenes):
    rng = random.Random(seed)
    return [rng.randrange(2 ** 31) for _ in range(n_scenes)]


def generate_corpus(seed, n_scenes, **kwargs):
    """List of scenes; scene ``i`` is seeded from a stream derived from ``seed``."""
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    return [generate_scene(s, scene_id=f"s{seed}-{i:04d}", **kwargs)
            for i, s in enumerate(corpus_seeds(seed, n_scenes))]


def write_corpus(scenes, out_dir, seed=None, params=None):
    """Write one document per scene plus ``manifest.json``; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for scene in scenes:
        name = f"{scene.generator['id']}.json"
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(dump_scene(scene))
        files.append(name)
    manifest = {"generator_version": GENERATOR_VERSION, "seed": seed,
                "params": params or {}, "scenes": files}
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return path

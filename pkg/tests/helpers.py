"""Fixture builders shared by the test modules."""

import math

import numpy as np

from eqasim.occupancy import FREE, OCCUPIED, UNEXPLORED, OccupancySlice
from eqasim.scene import Question, Room, Scene, SceneObject, validate_scene


def scene_from_ascii(lines, legend=None, objects=(), questions=(), cell_size=1.0):
    """Build a scene from a character grid.

    ``#`` is wall. Any other character is a free cell; ``legend`` maps
    characters to room names (``.`` defaults to a room called ``room``).
    ``objects`` holds ``(label, room, cells, attributes)`` tuples.
    """
    legend = dict(legend or {})
    legend.setdefault(".", "room")
    h, w = len(lines), len(lines[0])
    free = np.zeros((h, w), dtype=bool)
    cells = {}
    for r, line in enumerate(lines):
        assert len(line) == w, "ragged fixture"
        for c, ch in enumerate(line):
            if ch == "#":
                continue
            free[r, c] = True
            cells.setdefault(legend.get(ch, ch), set()).add((r, c))
    free.flags.writeable = False
    rooms = tuple(Room(name, frozenset(cs)) for name, cs in sorted(cells.items()))
    objs = tuple(SceneObject(label, frozenset(map(tuple, oc)), room, dict(attrs or {}))
                 for label, room, oc, attrs in objects)
    scene = Scene(free, cell_size, rooms, objs, tuple(questions))
    validate_scene(scene)
    return scene


def question(qid="q", regions=("room",), targets=(("box", "room"),), start=(1, 1),
             heading=0.0, kind="multiple_choice", truth="A", options=None,
             exhaustive=False, length=0.0):
    if options is None and kind == "multiple_choice":
        options = {"A": "red", "B": "blue", "C": "green", "D": "white"}
    return Question(id=qid, text=f"question {qid}", kind=kind, ground_truth=truth,
                    annotated_regions=tuple(regions), annotated_targets=tuple(targets),
                    gt_trajectory_length_m=length, requires_exhaustive=exhaustive,
                    options=options or {}, start=start, start_heading=heading)


def slice_from_ascii(lines, resolution=1.0):
    """``#`` occupied, ``.`` free, ``?`` unexplored."""
    table = {"#": OCCUPIED, ".": FREE, "?": UNEXPLORED}
    grid = np.array([[table[ch] for ch in line] for line in lines], dtype=np.int8)
    grid.flags.writeable = False
    return OccupancySlice(grid, resolution)


def random_slice(rng, h, w, p_occ=0.3, p_unk=0.2, resolution=1.0):
    u = rng.random((h, w))
    grid = np.full((h, w), FREE, dtype=np.int8)
    grid[u < p_occ] = OCCUPIED
    grid[(u >= p_occ) & (u < p_occ + p_unk)] = UNEXPLORED
    grid.flags.writeable = False
    return OccupancySlice(grid, resolution)


def random_free_mask(rng, h, w, p_wall=0.3):
    free = rng.random((h, w)) >= p_wall
    return free


def closed_room(h, w):
    """A walled ``h x w`` box (walls included in the size)."""
    return ["#" * w] + ["#" + "." * (w - 2) + "#" for _ in range(h - 2)] + ["#" * w]


def angle_close(a, b, tol=1e-9):
    d = (a - b + math.pi) % (2 * math.pi) - math.pi
    return abs(d) <= tol


# hand-built occupancy slices for doorway detection
DOORWAY_FIXTURES = [
    ["#######", "#.....#", "#.....#", "###.###", "#.....#", "#.....#", "#######"],
    ["#########", "#...#...#", "#.......#", "#...#...#", "#########"],
    ["#?#", "#.#", "#.#", "#?#"],
    ["?????", "#.#.#", "?????"],
    ["##.##", "#...#", "##.##"],
    ["#####", "#...#", "#####"],
    ["#######", "#.....#", "#.....#", "#.....#", "#######"],
    ["########", "#..##..#", "#......#", "#..##..#", "########"],
    ["#########", "#...#...#", "#.......#", "#.......#", "#...#...#", "#########"],
    ["###.###", "###.###", "#.....#", "###.###", "###.###"],
    ["#######", "#...###", "#......", "#...###", "#######"],
    ["?#####?", "?#...#?", "?#...#?", "?##.##?", "??...??"],
    ["#.#.#.#", "#.#.#.#", "#.....#", "#######"],
    ["..........", "....##....", "..........", "....##....", ".........."],
    ["#########", "#.#####.#", "#.......#", "#.#####.#", "#########"],
    ["###########", "#....#....#", "#....#....#", "#.........#", "#....#....#",
     "#....#....#", "###########"],
    ["##?##", "#...#", "?...?", "#...#", "##?##"],
    ["#########", "#.......#", "#.#####.#", "#.#...#.#", "#.#...#.#", "#...#...#",
     "#########"],
    ["####", "#..?", "#.#?", "#..?", "####"],
    ["#", ".", "#"],
]

"""Low-level grid geometry: DDA traversal, segment clearance and uniform-cost search.

All functions work on a boolean ``free`` array indexed ``[row, col]``. Continuous
coordinates are in *cell units* here (``x`` along columns, ``y`` along rows);
callers convert from meters.
"""

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)

# Boundary crossings closer than this (cell units) are treated as one corner
# crossing, so consecutive traversal parameters are always separated by more.
TIE_EPS = 1e-9

# (drow, dcol, cost in cells)
_NEIGHBORS_8 = (
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2),
)


def traverse(px, py, dx, dy, t_max):
    """Yield ``(row, col, t_enter, corner)`` for cells crossed by a ray.

    The ray starts at ``(px, py)`` with unit direction ``(dx, dy)`` and stops
    once ``t_enter >= t_max``. The first cell is yielded with ``t_enter = 0``.
    ``corner`` is ``None`` for ordinary steps; when the ray passes through a
    cell corner (within ``TIE_EPS``) it is the pair of orthogonal cells it
    grazed, and the traversal steps diagonally.
    """
    col = math.floor(px)
    row = math.floor(py)
    if dx > 0:
        step_c, t_next_c, dt_c = 1, (col + 1 - px) / dx, 1.0 / dx
    elif dx < 0:
        step_c, t_next_c, dt_c = -1, (px - col) / -dx, -1.0 / dx
    else:
        step_c, t_next_c, dt_c = 0, math.inf, math.inf
    if dy > 0:
        step_r, t_next_r, dt_r = 1, (row + 1 - py) / dy, 1.0 / dy
    elif dy < 0:
        step_r, t_next_r, dt_r = -1, (py - row) / -dy, -1.0 / dy
    else:
        step_r, t_next_r, dt_r = 0, math.inf, math.inf

    yield row, col, 0.0, None
    while True:
        if abs(t_next_c - t_next_r) <= TIE_EPS:
            t = min(t_next_c, t_next_r)
            if t >= t_max or math.isinf(t):
                return
            grazed = ((row, col + step_c), (row + step_r, col))
            col += step_c
            row += step_r
            t_next_c += dt_c
            t_next_r += dt_r
            yield row, col, t, grazed
        elif t_next_c < t_next_r:
            t = t_next_c
            if t >= t_max:
                return
            col += step_c
            t_next_c += dt_c
            yield row, col, t, None
        else:
            t = t_next_r
            if t >= t_max:
                return
            row += step_r
            t_next_r += dt_r
            yield row, col, t, None


def in_bounds(shape, row, col):
    return 0 <= row < shape[0] and 0 <= col < shape[1]


def is_free(free, row, col):
    return 0 <= row < free.shape[0] and 0 <= col < free.shape[1] and bool(free[row, col])


def segment_clear(free, a, b):
    """True if the straight segment ``a -> b`` (cell units) touches only free cells.

    Passing exactly through a corner requires both grazed cells to be free.
    """
    ax, ay = a
    bx, by = b
    length = math.hypot(bx - ax, by - ay)
    if not is_free(free, math.floor(ay), math.floor(ax)):
        return False
    if length == 0.0:
        return True
    dx, dy = (bx - ax) / length, (by - ay) / length
    for row, col, _t, corner in traverse(ax, ay, dx, dy, length):
        if not is_free(free, row, col):
            return False
        if corner is not None:
            (r1, c1), (r2, c2) = corner
            if not (is_free(free, r1, c1) and is_free(free, r2, c2)):
                return False
    # the endpoint may sit exactly on a boundary the traversal did not enter
    return is_free(free, math.floor(by), math.floor(bx))


def _expand(free, row, col):
    h, w = free.shape
    for dr, dc, cost in _NEIGHBORS_8:
        nr, nc = row + dr, col + dc
        if not (0 <= nr < h and 0 <= nc < w) or not free[nr, nc]:
            continue
        if dr and dc and not (free[row, nc] and free[nr, col]):
            continue  # no corner cutting
        yield nr, nc, cost


def uniform_cost_search(free, start, goal=None):
    """Dijkstra over 8-connected free cells without corner cutting.

    Returns ``(dist, parent)`` where ``dist`` is in cell units (``inf`` where
    unreachable) and ``parent`` holds flat predecessor indices (-1 for none).
    With ``goal`` given the search stops as soon as the goal is settled.
    """
    h, w = free.shape
    dist = np.full((h, w), np.inf)
    parent = np.full((h, w), -1, dtype=np.int64)
    sr, sc = start
    if not is_free(free, sr, sc):
        return dist, parent
    dist[sr, sc] = 0.0
    heap = [(0.0, sr, sc)]
    settled = np.zeros((h, w), dtype=bool)
    while heap:
        d, row, col = heapq.heappop(heap)
        if settled[row, col]:
            continue
        settled[row, col] = True
        if goal is not None and (row, col) == tuple(goal):
            break
        for nr, nc, cost in _expand(free, row, col):
            nd = d + cost
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                parent[nr, nc] = row * w + col
                heapq.heappush(heap, (nd, nr, nc))
    return dist, parent


def shortest_cell_path(free, start, goal):
    """Cell sequence from ``start`` to ``goal`` inclusive, or ``None``."""
    start, goal = tuple(start), tuple(goal)
    if not (is_free(free, *start) and is_free(free, *goal)):
        return None
    dist, parent = uniform_cost_search(free, start, goal)
    if math.isinf(dist[goal]):
        return None
    w = free.shape[1]
    path = [goal]
    cur = goal
    while cur != start:
        p = int(parent[cur])
        cur = (p // w, p % w)
        path.append(cur)
    path.reverse()
    return path


def bfs_distance_to(passable, targets, start):
    """4-connected BFS step count from ``start`` to the nearest ``targets`` cell.

    Movement is through ``passable`` cells; a target cell ends the search when
    first reached. Returns ``inf`` if no target is reachable.
    """
    from collections import deque

    h, w = passable.shape
    sr, sc = start
    if targets[sr, sc]:
        return 0
    seen = np.zeros((h, w), dtype=bool)
    seen[sr, sc] = True
    queue = deque([(sr, sc, 0)])
    while queue:
        row, col, d = queue.popleft()
        for nr, nc in ((row - 1, col), (row + 1, col), (row, col - 1), (row, col + 1)):
            if not (0 <= nr < h and 0 <= nc < w) or seen[nr, nc]:
                continue
            seen[nr, nc] = True
            if targets[nr, nc]:
                return d + 1
            if passable[nr, nc]:
                queue.append((nr, nc, d + 1))
    return math.inf


def connected_components(cells):
    """Split a set of ``(row, col)`` cells into 4-connected components.

    Components are returned largest first; ties broken by their smallest cell.
    """
    remaining = set(cells)
    comps = []
    while remaining:
        seed = min(remaining)
        remaining.discard(seed)
        comp = [seed]
        stack = [seed]
        while stack:
            r, c = stack.pop()
            for n in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if n in remaining:
                    remaining.discard(n)
                    comp.append(n)
                    stack.append(n)
        comps.append(sorted(comp))
    comps.sort(key=lambda comp: (-len(comp), comp[0]))
    return comps

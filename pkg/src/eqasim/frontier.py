"""Narrow-opening frontier candidates, DBSCAN clustering and the frontier queue."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import bfs_distance_to

DEFAULT_DELTA = 1
DEFAULT_EPS = 1.5
DEFAULT_MIN_PTS = 1
DEFAULT_WEIGHTS = (1.0, 0.5)


@dataclass(frozen=True, order=True)
class CandidateCell:
    coordinate: tuple  # (row, col) in slice cells
    axis: str  # "x", "y"; "boundary" for explored/unexplored boundary cells


def _shift(arr, dr, dc, fill):
    """``out[r, c] = arr[r + dr, c + dc]``, ``fill`` outside the array."""
    h, w = arr.shape
    out = np.full((h, w), fill, dtype=arr.dtype)
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = arr[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    return out


def candidate_masks(occ_slice, delta=DEFAULT_DELTA, literal=False):
    """Boolean masks ``(along_x, along_y)`` of narrow-opening cells.

    Default reading: a free cell is a candidate along an axis when, for some
    offset ``d <= delta``, the cells ``d`` away on *both* sides along that axis
    are occupied, while every perpendicular cell within ``delta`` is free or
    unexplored. ``literal=True`` instead marks any free cell with an occupied
    cell within ``delta`` along either axis.
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    occ = occ_slice.occupied
    free = occ_slice.free
    if literal:
        near_x = np.zeros_like(occ)
        near_y = np.zeros_like(occ)
        for d in range(1, delta + 1):
            near_x |= _shift(occ, 0, d, False) | _shift(occ, 0, -d, False)
            near_y |= _shift(occ, d, 0, False) | _shift(occ, -d, 0, False)
        along_x = free & near_x
        return along_x, free & near_y & ~along_x

    open_ = ~occ  # out of bounds counts as not occupied
    flank_x = np.zeros_like(occ)
    flank_y = np.zeros_like(occ)
    open_x = np.ones_like(occ)
    open_y = np.ones_like(occ)
    for d in range(1, delta + 1):
        flank_x |= _shift(occ, 0, d, False) & _shift(occ, 0, -d, False)
        flank_y |= _shift(occ, d, 0, False) & _shift(occ, -d, 0, False)
        open_x &= _shift(open_, 0, d, True) & _shift(open_, 0, -d, True)
        open_y &= _shift(open_, d, 0, True) & _shift(open_, -d, 0, True)
    return free & flank_x & open_y, free & flank_y & open_x


def detect_candidates(occ_slice, delta=DEFAULT_DELTA, literal=False):
    """Doorway / hallway candidate cells, sorted by coordinate."""
    along_x, along_y = candidate_masks(occ_slice, delta, literal)
    out = [CandidateCell((int(r), int(c)), "x") for r, c in zip(*np.nonzero(along_x))]
    out += [CandidateCell((int(r), int(c)), "y") for r, c in zip(*np.nonzero(along_y))]
    return sorted(out)


def boundary_candidates(occ_slice):
    """Classic frontier cells: free cells 4-adjacent to unexplored space."""
    unk = occ_slice.unexplored
    near = (_shift(unk, 1, 0, False) | _shift(unk, -1, 0, False)
            | _shift(unk, 0, 1, False) | _shift(unk, 0, -1, False))
    mask = occ_slice.free & near
    return [CandidateCell((int(r), int(c)), "boundary") for r, c in zip(*np.nonzero(mask))]


def dbscan(points, eps, min_pts):
    """Label ``points`` (sequence of coordinates) with DBSCAN; ``-1`` is noise.

    Points are visited in the given order, so cluster ids and the assignment of
    border points are deterministic for a fixed input order.
    """
    if eps <= 0 or min_pts < 1:
        raise ValueError("eps must be > 0 and min_pts >= 1")
    n = len(points)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    pts = np.asarray(points, dtype=float).reshape(n, -1)
    diff = pts[:, None, :] - pts[None, :, :]
    adjacency = np.einsum("ijk,ijk->ij", diff, diff) <= eps * eps
    neighbors = [np.flatnonzero(row) for row in adjacency]
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        visited[i] = True
        labels[i] = cluster
        frontier = list(neighbors[i])
        while frontier:
            j = frontier.pop()
            if labels[j] == -1:
                labels[j] = cluster
            if visited[j]:
                continue
            visited[j] = True
            if core[j]:
                frontier.extend(k for k in neighbors[j] if not visited[k])
        cluster += 1
    return labels


@dataclass(frozen=True)
class FrontierCluster:
    id: int
    member_cells: tuple  # sorted (row, col)
    centroid: tuple  # (row, col) floats
    size: int
    unexplored_distance: float = math.inf  # meters
    priority: float = -math.inf
    visited: bool = False
    kind: str = "doorway"

    @property
    def anchor(self):
        """Member cell closest to the centroid (ties: smallest coordinate)."""
        cr, cc = self.centroid
        return min(self.member_cells, key=lambda p: ((p[0] - cr) ** 2 + (p[1] - cc) ** 2, p))

    def sort_key(self):
        return (-self.priority, -self.size, self.centroid)


def cluster_candidates(candidates, eps=DEFAULT_EPS, min_pts=DEFAULT_MIN_PTS, kind="doorway"):
    """DBSCAN over candidate coordinates; noise is discarded."""
    coords = sorted({c.coordinate if isinstance(c, CandidateCell) else tuple(c)
                     for c in candidates})
    labels = dbscan(coords, eps, min_pts)
    groups = {}
    for coord, label in zip(coords, labels):
        if label >= 0:
            groups.setdefault(int(label), []).append(coord)
    clusters = []
    for label in sorted(groups):
        members = tuple(sorted(groups[label]))
        arr = np.asarray(members, dtype=float)
        centroid = (float(arr[:, 0].mean()), float(arr[:, 1].mean()))
        clusters.append(FrontierCluster(label, members, centroid, len(members), kind=kind))
    return clusters


@dataclass
class FrontierQueue:
    """Frontiers ordered by priority, then larger size, then smaller centroid."""

    items: list = field(default_factory=list)

    def __post_init__(self):
        self.items = sorted((f for f in self.items if not f.visited), key=FrontierCluster.sort_key)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __bool__(self):
        return bool(self.items)

    def peek(self):
        return self.items[0] if self.items else None

    def pop(self):
        return self.items.pop(0)


def rank_frontiers(clusters, occ_slice, weights=DEFAULT_WEIGHTS):
    """Score clusters by ``w_size * size - w_dist * unexplored_distance``.

    The distance is a 4-connected BFS through free cells from the cluster
    anchor to the nearest unexplored cell; unreachable clusters are dropped.
    """
    w_size, w_dist = weights
    if w_size <= 0 or w_dist <= 0:
        raise ValueError("priority weights must be positive")
    passable = occ_slice.free
    unexplored = occ_slice.unexplored
    ranked = []
    for cl in clusters:
        steps = bfs_distance_to(passable, unexplored, cl.anchor)
        if math.isinf(steps):
            continue
        dist = steps * occ_slice.resolution
        ranked.append(replace(cl, unexplored_distance=dist,
                              priority=w_size * cl.size - w_dist * dist))
    return FrontierQueue(ranked)


def overlay_graymap(occ_slice, candidates, clusters):
    """Slice graymap with ``D`` for candidates and cluster id digits on members."""
    rows = [list(line) for line in occ_slice.to_graymap().split("\n")]
    for cand in candidates:
        r, c = cand.coordinate if isinstance(cand, CandidateCell) else cand
        rows[r][c] = "D"
    for cl in clusters:
        for r, c in cl.member_cells:
            rows[r][c] = str(cl.id % 10)
    return "\n".join("".join(row) for row in rows)

"""TSDF occupancy fusion on a single fixed-height voxel layer."""

import math
from dataclasses import dataclass

import numpy as np

from .grid import traverse

UNEXPLORED = -1
FREE = 0
OCCUPIED = 1

DEFAULT_TRUNCATION = 0.3
DEFAULT_MAX_WEIGHT = 64.0

# slack (voxel units) when matching a voxel entry against the reported depth
_HIT_TOL = 5e-10

_GLYPHS = {UNEXPLORED: "?", FREE: ".", OCCUPIED: "#"}


class OccupancyVolume:
    """Per-voxel truncated signed distance, fusion weight and explored flag.

    ``tsdf`` is stored normalised by the truncation distance, so it always lies
    in ``[-1, 1]``. The volume is mutated in place by :meth:`fuse`.
    """

    def __init__(self, shape, resolution, truncation=DEFAULT_TRUNCATION,
                 max_weight=DEFAULT_MAX_WEIGHT):
        self.resolution = float(resolution)
        self.truncation = float(truncation)
        self.max_weight = float(max_weight)
        self.tsdf = np.zeros(shape, dtype=np.float64)
        self.weight = np.zeros(shape, dtype=np.float64)

    @classmethod
    def for_scene(cls, scene, resolution=None, **kwargs):
        res = scene.cell_size if resolution is None else float(resolution)
        ratio = scene.cell_size / res
        subdiv = round(ratio)
        if subdiv < 1 or abs(ratio - subdiv) > 1e-9:
            raise ValueError("resolution must divide the scene cell size")
        h, w = scene.shape
        return cls((h * subdiv, w * subdiv), res, **kwargs)

    @property
    def shape(self):
        return self.tsdf.shape

    @property
    def explored(self):
        return self.weight > 0

    def copy(self):
        out = OccupancyVolume(self.shape, self.resolution, self.truncation, self.max_weight)
        out.tsdf = self.tsdf.copy()
        out.weight = self.weight.copy()
        return out

    def _update(self, row, col, sdf):
        w = self.weight[row, col]
        self.tsdf[row, col] = (self.tsdf[row, col] * w + sdf) / (w + 1.0)
        self.weight[row, col] = min(w + 1.0, self.max_weight)

    def fuse(self, observation):
        """Integrate every depth ray of ``observation`` into the volume."""
        res = self.resolution
        h, w = self.shape
        pose = observation.pose
        px, py = pose.x / res, pose.y / res
        trunc = self.truncation
        for offset, depth, kind in observation.depth_rays:
            theta = pose.heading + offset
            dx, dy = math.cos(theta), math.sin(theta)
            d_vox = depth / res
            reach = d_vox + (trunc / res if kind == "wall" else 0.0)
            prev = None
            hit_axis = None
            for row, col, t, corner in traverse(px, py, dx, dy, reach):
                if not (0 <= row < h and 0 <= col < w):
                    break
                if kind != "wall" or t < d_vox - _HIT_TOL:
                    sdf = min(1.0, (depth - t * res) / trunc)
                    self._update(row, col, max(sdf, 0.0))
                else:
                    axis = None if corner is not None or prev is None else (
                        "row" if row != prev[0] else "col")
                    if hit_axis is None:
                        hit_axis = axis or "corner"
                    elif axis != hit_axis:
                        # left the hit voxel through a side face: not behind the surface
                        break
                    behind = t * res - depth + res / 2.0
                    sdf = -min(1.0, max(behind / trunc, 1e-6))
                    self._update(row, col, sdf)
                prev = (row, col)
        return self


def fuse_scan(volume, observation):
    """Return a new volume with ``observation`` fused; ``volume`` is untouched."""
    return volume.copy().fuse(observation)


@dataclass(frozen=True, eq=False)
class OccupancySlice:
    """Classified 2D slice: each cell is UNEXPLORED, FREE or OCCUPIED."""

    grid: np.ndarray  # int8
    resolution: float

    @property
    def shape(self):
        return self.grid.shape

    @property
    def free(self):
        return self.grid == FREE

    @property
    def occupied(self):
        return self.grid == OCCUPIED

    @property
    def unexplored(self):
        return self.grid == UNEXPLORED

    def cell_center(self, cell):
        r, c = cell
        return ((c + 0.5) * self.resolution, (r + 0.5) * self.resolution)

    def cell_of(self, x, y):
        return (math.floor(y / self.resolution), math.floor(x / self.resolution))

    def to_graymap(self):
        """``#`` occupied, ``.`` free, ``?`` unexplored; one line per row."""
        return "\n".join("".join(_GLYPHS[int(v)] for v in row) for row in self.grid)


def slice_volume(volume):
    grid = np.full(volume.shape, UNEXPLORED, dtype=np.int8)
    seen = volume.weight > 0
    grid[seen & (volume.tsdf >= 0)] = FREE
    grid[seen & (volume.tsdf < 0)] = OCCUPIED
    grid.flags.writeable = False
    return OccupancySlice(grid, volume.resolution)


def explored_fraction(occ_slice, scene):
    """Share of the scene's free cells whose footprint holds any explored voxel."""
    h, w = scene.shape
    sub = occ_slice.shape[0] // h
    explored = occ_slice.grid != UNEXPLORED
    if sub > 1:
        explored = explored.reshape(h, sub, w, sub).any(axis=(1, 3))
    total = scene.free_cell_count
    if total == 0:
        return 0.0
    return float((explored & scene.free).sum()) / total

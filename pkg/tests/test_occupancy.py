import math

import numpy as np
import pytest

from eqasim.explorer import initial_spin
from eqasim.occupancy import (FREE, OCCUPIED, UNEXPLORED, OccupancyVolume, explored_fraction,
                              fuse_scan, slice_volume)
from eqasim.scene import AgentState, Observation, ray_offsets, render_observation

from helpers import closed_room, scene_from_ascii
from oracles import line_of_sight_cells


def _single_ray(x, y, depth, kind="wall"):
    return Observation(0, AgentState(x, y, 0.0), ((0.0, depth, kind),), frozenset(), (), ())


def test_one_ray_truncation_band():
    vol = OccupancyVolume((10, 40), 0.1, truncation=0.3)
    vol.fuse(_single_ray(0.0, 0.55, 2.0))
    row = slice_volume(vol).grid[5]
    assert (row[:20] == FREE).all()  # [0, 2) m
    assert row[20] == OCCUPIED  # the wall voxel
    assert (row[20:23] == OCCUPIED).all()  # within the truncation band
    assert row[25] == UNEXPLORED  # 0.5 m behind the surface
    assert (row[23:] == UNEXPLORED).all()
    grid = slice_volume(vol).grid
    assert (np.delete(grid, 5, axis=0) == UNEXPLORED).all()


def test_tsdf_is_normalised():
    vol = OccupancyVolume((10, 40), 0.1, truncation=0.3)
    vol.fuse(_single_ray(0.0, 0.55, 2.0))
    assert vol.tsdf.min() >= -1.0 and vol.tsdf.max() <= 1.0
    assert vol.tsdf[5, 0] == 1.0


def test_no_hit_ray_marks_only_free():
    vol = OccupancyVolume((3, 30), 0.5)
    vol.fuse(_single_ray(0.0, 0.6, 10.0, kind="none"))
    grid = slice_volume(vol).grid
    assert (grid[1, :20] == FREE).all()
    assert (grid[1, 20:] == UNEXPLORED).all()


def test_empty_volume_is_unexplored():
    vol = OccupancyVolume((6, 7), 1.0)
    assert (slice_volume(vol).grid == UNEXPLORED).all()


def test_fuse_scan_is_pure_and_idempotent():
    scene = scene_from_ascii(closed_room(6, 9))
    obs = render_observation(scene, AgentState(2.3, 2.6, 0.4))
    vol = OccupancyVolume.for_scene(scene)
    once = fuse_scan(vol, obs)
    assert not vol.explored.any()
    twice = fuse_scan(once, obs)
    assert np.array_equal(slice_volume(once).grid, slice_volume(twice).grid)


def _oracle_grid(scene, observations):
    free_seen, hits = set(), set()
    for obs in observations:
        p = obs.pose
        for off, _d, _k in obs.depth_rays:
            seen, hit = line_of_sight_cells(scene.free, p.x, p.y, p.heading + off,
                                            10.0, step=1e-4)
            free_seen |= set(seen)
            if hit is not None:
                hits.add(hit)
    grid = np.full(scene.shape, UNEXPLORED, dtype=np.int8)
    for c in free_seen:
        grid[c] = FREE
    for c in hits:
        grid[c] = OCCUPIED
    return grid


def test_perpendicular_scans_of_corner_match_raster_oracle():
    scene = scene_from_ascii(["##########",
                              "#........#",
                              "#........#",
                              "#....#####",
                              "#....#####",
                              "#....#####",
                              "##########"])
    scans = [render_observation(scene, AgentState(2.37, 4.61, 0.05)),
             render_observation(scene, AgentState(3.13, 1.42, math.pi / 2 + 0.05))]
    vol = OccupancyVolume.for_scene(scene)
    for obs in scans:
        vol.fuse(obs)
    assert np.array_equal(slice_volume(vol).grid, _oracle_grid(scene, scans))


def test_spin_in_closed_room():
    lines = closed_room(6, 7)
    scene = scene_from_ascii(lines)
    obs, vol, state = initial_spin(scene, AgentState(3.5, 3.0, 0.1))
    assert state.step_count == 8
    grid = slice_volume(vol).grid
    h, w = scene.shape
    corners = {(0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)}
    for r in range(h):
        for c in range(w):
            if scene.free[r, c]:
                assert grid[r, c] == FREE, (r, c)
            elif (r, c) in corners:
                # no ray can reach a wall cell hidden behind two others
                assert grid[r, c] == UNEXPLORED
            else:
                assert grid[r, c] == OCCUPIED, (r, c)
    # a second spin changes nothing
    _, vol2, _ = initial_spin(scene, state, volume=vol.copy(), first_id=8)
    assert np.array_equal(slice_volume(vol2).grid, grid)


def test_explored_fraction_bounds_and_oracle():
    scene = scene_from_ascii(["###########",
                              "#.....#...#",
                              "#.....#...#",
                              "#.........#",
                              "###########"])
    vol = OccupancyVolume.for_scene(scene)
    assert explored_fraction(slice_volume(vol), scene) == 0.0
    observations, vol, _ = initial_spin(scene, AgentState(2.5, 2.5, 0.0))
    oracle = _oracle_grid(scene, observations)
    expected = ((oracle != UNEXPLORED) & scene.free).sum() / scene.free_cell_count
    value = explored_fraction(slice_volume(vol), scene)
    assert value == pytest.approx(expected, abs=1e-12)
    assert 0.0 < value < 1.0
    # observing from the other room completes the picture
    more, vol, _ = initial_spin(scene, AgentState(8.5, 2.5, 0.0), volume=vol)
    assert explored_fraction(slice_volume(vol), scene) == 1.0


def test_subdivided_resolution():
    scene = scene_from_ascii(closed_room(5, 5))
    vol = OccupancyVolume.for_scene(scene, resolution=0.5)
    assert vol.shape == (10, 10)
    obs, vol, _ = initial_spin(scene, AgentState(2.5, 2.5), volume=vol)
    assert explored_fraction(slice_volume(vol), scene) == 1.0
    with pytest.raises(ValueError):
        OccupancyVolume.for_scene(scene, resolution=0.3)


def test_ray_offsets_span_fov():
    offs = ray_offsets(math.pi / 2, 5)
    assert offs[0] == pytest.approx(-math.pi / 4)
    assert offs[-1] == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError):
        ray_offsets(1.0, 1)

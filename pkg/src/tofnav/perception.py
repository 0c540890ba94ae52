"""Occupancy thresholding and grouping of occupied zones into obstacle clusters.

The grouping is a depth-first flood fill with an explicit stack. It touches
every zone at most once, so a frame costs O(64) regardless of content.
Components below ``min_group_size`` zones are treated as outliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .sensor import COLS, ROWS, DepthFrame, SensorConfig, column_edge_angles

N_ZONES = ROWS * COLS


@dataclass(frozen=True)
class PerceptionConfig:
    occupancy_threshold_mm: float = 2000.0
    connectivity: int = 8
    min_group_size: int = 2
    max_groups: int = 4

    def __post_init__(self):
        if self.occupancy_threshold_mm <= 0:
            raise ValueError("occupancy_threshold_mm must be > 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.min_group_size < 1:
            raise ValueError("min_group_size must be >= 1")
        if self.max_groups < 1:
            raise ValueError("max_groups must be >= 1")


@dataclass(eq=False)
class OccupancyFrame:
    occupied: np.ndarray
    source_timestamp_ms: int = 0


@dataclass(frozen=True)
class ObjectGroup:
    min_row: int
    max_row: int
    min_col: int
    max_col: int
    pixel_count: int
    centroid: tuple
    min_distance_mm: float
    pixels: tuple  # ((row, col), ...) in row-major order

    @property
    def rows(self) -> frozenset:
        return frozenset(r for r, _ in self.pixels)

    @property
    def cols(self) -> frozenset:
        return frozenset(c for _, c in self.pixels)


class GroupGeometry(NamedTuple):
    azimuth_span: float  # radians between the outer column edges
    lateral_width: float  # metres, measured at min distance
    side: str  # "left", "right" or "center"


def _neighbour_table(connectivity: int) -> tuple:
    if connectivity == 4:
        offsets = ((-1, 0), (0, -1), (0, 1), (1, 0))
    else:
        offsets = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
    table = []
    for i in range(N_ZONES):
        r, c = divmod(i, COLS)
        table.append(tuple((r + dr) * COLS + c + dc for dr, dc in offsets
                           if 0 <= r + dr < ROWS and 0 <= c + dc < COLS))
    return tuple(table)


_NEIGHBOURS = {4: _neighbour_table(4), 8: _neighbour_table(8)}


def threshold(frame: DepthFrame, cfg: PerceptionConfig = PerceptionConfig()) -> OccupancyFrame:
    occ = frame.valid & (frame.distance_mm <= cfg.occupancy_threshold_mm)
    return OccupancyFrame(occ, frame.timestamp_ms)


def connected_components(occupied, connectivity: int = 8, min_size: int = 2, stats: dict | None = None) -> list:
    """Connected components of a flat 64-entry occupancy sequence, as sorted lists of flat indices.

    Seeds are scanned in row-major order. ``stats["visits"]`` receives the
    number of zones pushed onto the stack (each zone at most once).
    """
    neighbours = _NEIGHBOURS[connectivity]
    todo = list(occupied)  # cleared as zones are visited
    comps = []
    visits = 0
    for seed in range(N_ZONES):
        if not todo[seed]:
            continue
        todo[seed] = False
        stack = [seed]
        push = stack.append
        pop = stack.pop
        comp = []
        add = comp.append
        while stack:
            i = pop()
            add(i)
            for j in neighbours[i]:
                if todo[j]:
                    todo[j] = False
                    push(j)
        visits += len(comp)
        if len(comp) >= min_size:
            comp.sort()
            comps.append(comp)
    if stats is not None:
        stats["visits"] = visits
    return comps


_ROW_OF = tuple(i // COLS for i in range(N_ZONES))
_COL_OF = tuple(i % COLS for i in range(N_ZONES))
_PIXEL_OF = tuple(divmod(i, COLS) for i in range(N_ZONES))


def _make_group(comp: list, dist: list) -> ObjectGroup:
    rows = [_ROW_OF[i] for i in comp]
    cols = [_COL_OF[i] for i in comp]
    n = len(comp)
    return ObjectGroup(
        min_row=rows[0],
        max_row=rows[-1],
        min_col=min(cols),
        max_col=max(cols),
        pixel_count=n,
        centroid=(sum(rows) / n, sum(cols) / n),
        min_distance_mm=min([dist[i] for i in comp]),
        pixels=tuple([_PIXEL_OF[i] for i in comp]),
    )


def group_priority(g: ObjectGroup) -> tuple:
    return (g.min_distance_mm, g.min_row, g.min_col)


def group(frame: OccupancyFrame, depths: DepthFrame, cfg: PerceptionConfig = PerceptionConfig(),
          stats: dict | None = None) -> list:
    """Cluster occupied zones; nearest groups first, at most ``cfg.max_groups`` of them."""
    occ = frame.occupied.ravel().tolist()
    comps = connected_components(occ, cfg.connectivity, cfg.min_group_size, stats)
    if not comps:
        return []
    dist = depths.distance_mm.ravel().tolist()
    groups = [_make_group(c, dist) for c in comps]
    groups.sort(key=group_priority)
    return groups[: cfg.max_groups]


def extract_groups(frame: DepthFrame, cfg: PerceptionConfig = PerceptionConfig()) -> list:
    """``group`` composed with ``threshold``."""
    return group(threshold(frame, cfg), frame, cfg)


@lru_cache(maxsize=16)
def _edges(cfg: SensorConfig) -> tuple:
    angles = [float(a) for a in column_edge_angles(cfg)]
    return tuple(angles), tuple(math.tan(a) for a in angles)


def group_features(g: ObjectGroup, cfg: SensorConfig = SensorConfig()) -> GroupGeometry:
    angles, tans = _edges(cfg)
    left = angles[g.min_col]
    right = angles[g.max_col + 1]
    d = g.min_distance_mm / 1000.0
    width = d * (tans[g.max_col + 1] - tans[g.min_col])
    c = g.centroid[1]
    half = (cfg.cols - 1) / 2.0
    side = "left" if c < half else "right" if c > half else "center"
    return GroupGeometry(right - left, width, side)


def band_width(first_col: int, last_col: int, distance_m: float, cfg: SensorConfig = SensorConfig()) -> float:
    """Lateral extent (m) covered by columns ``first_col..last_col`` at an axial distance."""
    edges = column_edge_angles(cfg)
    return distance_m * (math.tan(edges[last_col + 1]) - math.tan(edges[first_col]))

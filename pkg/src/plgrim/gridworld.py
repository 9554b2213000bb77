"""Ground-truth grid environment: occupancy/hazard map, robot motion, sensing.

Map file alphabet: '#' Occupied, '.' Free hazard 0, '1'-'9' Free with hazard
digit/10, 'S' Free start cell (at most one). The world is closed: boundary
cells are always Occupied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .kernels import los_blocked, supercover, visible_mask

FREE = 0
OCCUPIED = 1

Cell = tuple[int, int]

# N, E, S, W, NE, SE, SW, NW -- the canonical neighbor expansion order
DIRECTIONS: tuple[Cell, ...] = (
    (0, -1), (1, 0), (0, 1), (-1, 0),
    (1, -1), (1, 1), (-1, 1), (-1, -1),
)


class MapError(ValueError):
    """Base class for map parse failures."""


class RaggedMapError(MapError):
    pass


class UnknownCharError(MapError):
    pass


class NoFreeCellError(MapError):
    pass


class MultipleStartError(MapError):
    pass


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    cell_size: float
    occupancy: np.ndarray  # (h, w) uint8, FREE/OCCUPIED
    hazard: np.ndarray     # (h, w) float64 in [0, 1]; 1.0 on Occupied cells
    start: Cell | None = None

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, cell: Cell) -> bool:
        x, y = cell
        return self.in_bounds(cell) and self.occupancy[y, x] == FREE

    def free_cells(self) -> list[Cell]:
        ys, xs = np.nonzero(self.occupancy == FREE)
        return [(int(x), int(y)) for x, y in zip(xs, ys)]


@dataclass(frozen=True)
class RobotState:
    cell: Cell
    distance_traveled: float = 0.0
    speed: float = 1.0


@dataclass(frozen=True)
class Observation:
    origin: Cell
    sensed: tuple[tuple[Cell, int], ...]   # ((x, y), occupancy) pairs
    hazards: tuple[tuple[Cell, float], ...] = ()  # hazard readings for sensed Free cells


def load_map(text: str, cell_size: float = 0.5) -> GridMap:
    """Parse map-file text into a GridMap. Boundary cells are forced Occupied."""
    rows = [line for line in text.splitlines()]
    while rows and rows[-1] == "":
        rows.pop()
    if not rows:
        raise NoFreeCellError("empty map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise RaggedMapError("rows have unequal lengths")
    if width == 0:
        raise NoFreeCellError("empty map")
    height = len(rows)
    occ = np.full((height, width), OCCUPIED, dtype=np.uint8)
    haz = np.ones((height, width), dtype=np.float64)
    start: Cell | None = None
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            boundary = x == 0 or y == 0 or x == width - 1 or y == height - 1
            if ch == "#":
                continue
            elif ch == ".":
                level = 0.0
            elif ch == "S":
                if start is not None:
                    raise MultipleStartError("more than one start cell")
                start = (x, y)
                level = 0.0
            elif "1" <= ch <= "9":
                level = int(ch) / 10.0
            else:
                raise UnknownCharError(f"unknown map character {ch!r} at ({x},{y})")
            if boundary:
                continue  # closed world: boundary stays Occupied
            occ[y, x] = FREE
            haz[y, x] = level
    if not (occ == FREE).any():
        raise NoFreeCellError("map has no Free cell")
    if start is not None and occ[start[1], start[0]] != FREE:
        start = None
    return GridMap(width=width, height=height, cell_size=cell_size,
                   occupancy=occ, hazard=haz, start=start)


def dump_map(m: GridMap) -> str:
    """Inverse of load_map (hazards rounded to the digit alphabet)."""
    lines = []
    for y in range(m.height):
        chars = []
        for x in range(m.width):
            if m.occupancy[y, x] == OCCUPIED:
                chars.append("#")
            elif m.start == (x, y):
                chars.append("S")
            else:
                level = int(round(m.hazard[y, x] * 10))
                chars.append("." if level == 0 else str(min(level, 9)))
        lines.append("".join(chars))
    return "\n".join(lines) + "\n"


def line_of_sight(m: GridMap, a: Cell, b: Cell) -> bool:
    """True iff the supercover line a-b crosses no Occupied cell strictly between."""
    if not m.in_bounds(a) or not m.in_bounds(b):
        raise IndexError(f"cell out of bounds: {a if not m.in_bounds(a) else b}")
    if a == b:
        return True
    return not los_blocked(m.occupancy, a[0], a[1], b[0], b[1])


def sense(m: GridMap, q: RobotState, r_sense: float) -> Observation:
    """Deterministic truthful sensing: all cells within r_sense with LOS."""
    if not m.is_free(q.cell):
        raise ValueError(f"robot cell {q.cell} is not Free")
    r_cells = r_sense / m.cell_size
    mask = visible_mask(m.occupancy, q.cell[0], q.cell[1], r_cells)
    ys, xs = np.nonzero(mask)
    sensed = tuple(((int(x), int(y)), int(m.occupancy[y, x])) for x, y in zip(xs, ys))
    hazards = tuple(((int(x), int(y)), float(m.hazard[y, x]))
                    for x, y in zip(xs, ys) if m.occupancy[y, x] == FREE)
    return Observation(origin=q.cell, sensed=sensed, hazards=hazards)


def step_distance(a: Cell, b: Cell, cell_size: float) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    if max(dx, dy) != 1 or (dx == 0 and dy == 0):
        raise ValueError(f"cells {a} and {b} are not 8-adjacent")
    return cell_size * (math.sqrt(2.0) if dx == 1 and dy == 1 else 1.0)


def step(m: GridMap, q: RobotState, target: Cell) -> RobotState:
    """Move one lattice step; errors leave the state unchanged."""
    d = step_distance(q.cell, target, m.cell_size)
    if not m.is_free(target):
        raise ValueError(f"target cell {target} is not Free")
    return replace(q, cell=target, distance_traveled=q.distance_traveled + d)


__all__ = [
    "FREE", "OCCUPIED", "Cell", "DIRECTIONS",
    "GridMap", "RobotState", "Observation",
    "MapError", "RaggedMapError", "UnknownCharError", "NoFreeCellError",
    "MultipleStartError",
    "load_map", "dump_map", "line_of_sight", "sense", "step", "step_distance",
    "supercover",
]

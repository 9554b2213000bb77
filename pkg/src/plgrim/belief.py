"""Agent belief: known occupancy, coverage state, risk map, robot state.

Information gain of an observation is the count of cells newly marked
covered (one bit per cell under an independent Bernoulli(1/2) coverage
prior with deterministic sensing).
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .gridworld import (DIRECTIONS, FREE, Cell, GridMap, Observation,
                        RobotState)
from .risk import RiskMap, update_risk

UNKNOWN = -1


@dataclass
class Belief:
    known_occ: np.ndarray          # (h, w) int8: UNKNOWN / FREE / OCCUPIED
    covered: np.ndarray            # (h, w) bool; meaningful for known-Free cells
    risk: RiskMap
    robot: RobotState
    step: int = 0

    @property
    def width(self) -> int:
        return self.known_occ.shape[1]

    @property
    def height(self) -> int:
        return self.known_occ.shape[0]

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_known_free(self, cell: Cell) -> bool:
        x, y = cell
        return self.in_bounds(cell) and self.known_occ[y, x] == FREE

    def copy(self) -> "Belief":
        return Belief(known_occ=self.known_occ.copy(), covered=self.covered.copy(),
                      risk=self.risk.copy(), robot=self.robot, step=self.step)

    @staticmethod
    def initial(width: int, height: int, robot: RobotState, risk: RiskMap) -> "Belief":
        return Belief(known_occ=np.full((height, width), UNKNOWN, dtype=np.int8),
                      covered=np.zeros((height, width), dtype=bool),
                      risk=risk, robot=robot, step=0)


def integrate(b: Belief, z: Observation) -> tuple[Belief, float]:
    """Fold an observation into the belief (in place); returns info gain in bits."""
    if z.origin != b.robot.cell:
        raise ValueError(f"observation origin {z.origin} != robot cell {b.robot.cell}")
    newly = 0
    for (x, y), occ in z.sensed:
        b.known_occ[y, x] = occ
        if occ == FREE and not b.covered[y, x]:
            b.covered[y, x] = True
            newly += 1
    update_risk(b.risk, z, b.robot.cell, b.step)
    return b, float(newly)


def coverage_fraction(b: Belief, truth: GridMap) -> float:
    """Covered Free cells over all ground-truth Free cells."""
    if (b.height, b.width) != (truth.height, truth.width):
        raise ValueError("belief and map dimensions differ")
    free = truth.occupancy == FREE
    total = int(free.sum())
    if total == 0:
        return 0.0
    return float((b.covered & free).sum()) / total


def _dijkstra_core(b: Belief, seeds: list[Cell],
                   targets: set[Cell] | None, max_cost: float):
    """Shared Dijkstra engine over known-Free cells under edge_risk_cost.

    Edge costs are evaluated from a CVaR grid computed once up front, which
    matches the per-cell estimate exactly up to floating-point evaluation
    order. Ties break on (cost, hops, insertion order) with neighbors
    expanded in the canonical direction order.
    """
    import math

    occ = b.known_occ
    height, width = occ.shape
    rm = b.risk
    cvar = rm.cvar_grid()
    r_max = rm.r_max
    half_lambda = 0.5 * rm.lambda_risk
    cs = rm.cell_size
    diag = cs * math.sqrt(2.0)
    dist: dict[Cell, float] = {}
    hops: dict[Cell, int] = {}
    prev: dict[Cell, Cell] = {}
    done: set[Cell] = set()
    remaining = set(targets) if targets is not None else None
    heap: list[tuple[float, int, int, Cell]] = []
    counter = 0
    for cell in seeds:
        dist[cell] = 0.0
        hops[cell] = 0
        heap.append((0.0, 0, counter, cell))
        counter += 1
    while heap:
        d, h, _, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        if remaining is not None:
            remaining.discard(cell)
            if not remaining:
                break
        if d > max_cost:
            break
        x, y = cell
        ca = cvar[y, x]
        for dx, dy in DIRECTIONS:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < width and 0 <= ny < height):
                continue
            if occ[ny, nx] != FREE:
                continue
            cb = cvar[ny, nx]
            if ca > r_max or cb > r_max:
                continue
            length = diag if dx != 0 and dy != 0 else cs
            nd = d + length * (1.0 + half_lambda * (ca + cb))
            nh = h + 1
            nxt = (nx, ny)
            if nxt not in dist or (nd, nh) < (dist[nxt], hops[nxt]):
                dist[nxt] = nd
                hops[nxt] = nh
                prev[nxt] = cell
                heapq.heappush(heap, (nd, nh, counter, nxt))
                counter += 1
    return dist, prev


def dijkstra(b: Belief, src: Cell, *, targets: set[Cell] | None = None,
             max_cost: float = np.inf):
    """Deterministic Dijkstra over known-Free cells under edge_risk_cost.

    Returns (dist, prev) dicts. Stops early once every target has been
    settled.
    """
    return _dijkstra_core(b, [src], targets, max_cost)


def dijkstra_multi(b: Belief, sources: list[Cell], *,
                   max_cost: float = np.inf):
    """Multi-source Dijkstra: distance to the nearest source for every
    reachable cell, plus which source claims it.

    Returns (dist, origin) dicts; origin maps each reachable cell to the
    source it was reached from. Ties between sources resolve to the one
    listed first.
    """
    dist, prev = _dijkstra_core(b, list(dict.fromkeys(sources)), None,
                                max_cost)
    origin: dict[Cell, Cell] = {}
    for cell in dist:
        chain: list[Cell] = []
        cur = cell
        while cur in prev and cur not in origin:
            chain.append(cur)
            cur = prev[cur]
        root = origin.get(cur, cur)
        for c in chain:
            origin[c] = root
        origin[cell] = root
    return dist, origin


def shortest_path(b: Belief, src: Cell, dst: Cell) -> tuple[list[Cell], float] | None:
    """Minimal-cost path over known-Free cells; None if disconnected.

    The returned path excludes src (empty when src == dst).
    """
    for c in (src, dst):
        if not b.is_known_free(c):
            raise ValueError(f"endpoint {c} is not known Free")
    if src == dst:
        return [], 0.0
    dist, prev = dijkstra(b, src, targets={dst})
    if dst not in dist:
        return None
    path: list[Cell] = []
    cur = dst
    while cur != src:
        path.append(cur)
        cur = prev[cur]
    path.reverse()
    return path, dist[dst]


__all__ = ["UNKNOWN", "Belief", "integrate", "coverage_fraction",
           "dijkstra", "dijkstra_multi", "shortest_path"]

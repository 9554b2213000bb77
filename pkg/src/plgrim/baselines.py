"""Comparison planners sharing the same belief/IRM substrate.

NBV: sample view points near the robot, score by predicted newly covered
cells minus path cost, go to the best. Falls back to nearest-frontier
transit when no sampled view has positive utility (it gets stuck otherwise).

HFE: go to the nearest frontier within the local radius if any, else the
nearest frontier globally; repeat until no frontiers remain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .belief import UNKNOWN, Belief, dijkstra, shortest_path
from .config import Config
from .gridworld import FREE, Cell
from .irm import Frontier, GlobalIRM, detect_frontiers, update_global_irm
from .kernels import visible_mask
from .planner import (DONE, GLOBAL_TRANSIT, LOCAL_COVERAGE, Plan)

NO_PROGRESS = "NoProgress"


@dataclass(frozen=True)
class ViewCandidate:
    cell: Cell
    path: tuple[Cell, ...]
    utility: float


def predicted_new_cells(b: Belief, view: Cell, r_sense: float) -> int:
    """Cells newly covered from `view` under known occupancy only."""
    blocked = (b.known_occ != FREE).astype(np.uint8)
    r_cells = r_sense / b.risk.cell_size
    vis = visible_mask(blocked, view[0], view[1], r_cells)
    new = vis & ((b.known_occ == UNKNOWN) | ((b.known_occ == FREE) & ~b.covered))
    return int(new.sum())


def nbv_plan(b: Belief, n_samples: int, r_view: float, rng,
             *, r_sense: float = 4.0, lambda_info: float = 1.0,
             lambda_cost: float = 0.5) -> Plan | str:
    """Best sampled view point by info-minus-cost utility, or NO_PROGRESS."""
    cs = b.risk.cell_size
    r_cells = r_view / cs
    cx, cy = b.robot.cell
    dist, prev = dijkstra(b, b.robot.cell, max_cost=math.inf)
    in_range = sorted(c for c in dist
                      if math.hypot(c[0] - cx, c[1] - cy) <= r_cells)
    if not in_range:
        return NO_PROGRESS
    if len(in_range) <= n_samples:
        views = in_range
    else:
        idx = rng.choice(len(in_range), size=n_samples, replace=False)
        views = sorted(in_range[int(i)] for i in idx)
    best: tuple[float, Cell] | None = None
    for v in views:
        gain = predicted_new_cells(b, v, r_sense)
        utility = lambda_info * gain - lambda_cost * dist[v]
        # ties broken lexicographically by cell (views iterated sorted)
        if best is None or utility > best[0] + 1e-12:
            best = (utility, v)
    if best is None or best[0] <= 0.0:
        return NO_PROGRESS
    cells = _unwind(prev, b.robot.cell, best[1])
    return Plan(mode=LOCAL_COVERAGE, cells=cells, created_at=b.step,
                value=best[0])


def _unwind(prev: dict[Cell, Cell], src: Cell, dst: Cell) -> list[Cell]:
    path: list[Cell] = []
    cur = dst
    while cur != src:
        path.append(cur)
        cur = prev[cur]
    path.reverse()
    return path


def hfe_plan(b: Belief, g: GlobalIRM, *, r_local: float,
             min_frontier_size: int = 2) -> Plan:
    """Nearest local frontier by path cost, else nearest global frontier.

    Widens to single-cell clusters before declaring Done: the preferred set
    can consist solely of sensed-but-disconnected pockets with no believed
    path from the robot, while a reachable small frontier still remains.
    """
    cs = b.risk.cell_size
    cx, cy = b.robot.cell
    for min_size in dict.fromkeys((min_frontier_size, 1)):
        frontiers = detect_frontiers(b, min_size)
        if not frontiers:
            continue
        local = [f for f in frontiers
                 if math.hypot(f.centroid[0] - cx,
                               f.centroid[1] - cy) * cs <= r_local]
        pools = [local, frontiers] if local else [frontiers]
        for pool in pools:
            best: tuple[float, Cell, list[Cell]] | None = None
            for f in pool:
                target = _nearest_member(b, f)
                sp = shortest_path(b, b.robot.cell, target) if target else None
                if sp is None:
                    continue
                path, cost = sp
                key = (cost, f.centroid)
                if best is None or key < (best[0], best[1]):
                    best = (cost, f.centroid, path)
            if best is not None:
                return Plan(mode=GLOBAL_TRANSIT, cells=best[2], theta=best[1],
                            created_at=b.step, value=-best[0])
    return Plan(mode=DONE, cells=[], created_at=b.step)


def _nearest_member(b: Belief, f: Frontier) -> Cell | None:
    if b.is_known_free(f.centroid):
        return f.centroid
    members = sorted(c for c in f.cells if b.is_known_free(c))
    return members[0] if members else None


class NbvPlanner:
    """Episode wrapper with the stuck-fallback to nearest-frontier transit."""

    name = "nbv"

    def __init__(self, cfg: Config, rng):
        self.cfg = cfg
        self.rng = rng
        self.girm = GlobalIRM()

    def plan(self, b: Belief, prev: Plan | None) -> Plan:
        frontiers = detect_frontiers(b, self.cfg.irm_min_frontier_size)
        if not frontiers:
            frontiers = detect_frontiers(b, 1)
        update_global_irm(self.girm, b, frontiers, d_bc=self.cfg.irm_d_bc,
                          r_connect=self.cfg.irm_r_connect)
        r_view = self.cfg.irm_local_radius * self.cfg.gridworld_cell_size
        plan = nbv_plan(b, self.cfg.nbv_n_samples, r_view, self.rng,
                        r_sense=self.cfg.gridworld_r_sense,
                        lambda_info=self.cfg.lcp_lambda_info,
                        lambda_cost=self.cfg.lcp_lambda_cost)
        if plan != NO_PROGRESS:
            return plan
        # myopic planner stuck: transit toward the nearest frontier instead
        fallback = hfe_plan(b, self.girm, r_local=math.inf,
                            min_frontier_size=self.cfg.irm_min_frontier_size)
        return fallback

    def recover(self, b: Belief) -> Belief:
        from .planner import resiliency_step

        return resiliency_step(b, 2, self.cfg)


class HfePlanner:
    name = "hfe"

    def __init__(self, cfg: Config, rng):
        self.cfg = cfg
        self.rng = rng
        self.girm = GlobalIRM()

    def plan(self, b: Belief, prev: Plan | None) -> Plan:
        frontiers = detect_frontiers(b, self.cfg.irm_min_frontier_size)
        if not frontiers:
            frontiers = detect_frontiers(b, 1)
        update_global_irm(self.girm, b, frontiers, d_bc=self.cfg.irm_d_bc,
                          r_connect=self.cfg.irm_r_connect)
        r_local = self.cfg.irm_local_radius * self.cfg.gridworld_cell_size
        return hfe_plan(b, self.girm, r_local=r_local,
                        min_frontier_size=self.cfg.irm_min_frontier_size)

    def recover(self, b: Belief) -> Belief:
        from .planner import resiliency_step

        return resiliency_step(b, 2, self.cfg)


__all__ = ["NO_PROGRESS", "ViewCandidate", "predicted_new_cells",
           "nbv_plan", "hfe_plan", "NbvPlanner", "HfePlanner"]

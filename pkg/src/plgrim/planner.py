"""Receding-horizon orchestration: cascade the global and local planners,
switch between local coverage and global transit, keep plans consistent
under value ties, and escalate recovery when progress stalls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .belief import Belief, shortest_path
from .config import Config
from .gcp import frontier_goal, solve_gcp
from .gridworld import Cell, GridMap, sense, step
from .irm import (VALID, Frontier, GlobalIRM, check_path, detect_frontiers,
                  rebuild_local_irm, update_global_irm)
from .lcp import pomcp_plan
from .risk import raise_risk_threshold

LOCAL_COVERAGE = "LocalCoverage"
GLOBAL_TRANSIT = "GlobalTransit"
RECOVERY = "Recovery"
DONE = "Done"

OK = "Ok"


@dataclass(frozen=True)
class PlanInvalidated:
    index: int


@dataclass
class Plan:
    mode: str
    cells: list[Cell]            # waypoints to execute, excluding the robot's cell
    theta: Cell | None = None    # target frontier centroid, if any
    created_at: int = 0
    value: float = 0.0


@dataclass
class Blacklist:
    entries: dict[Cell, int] = field(default_factory=dict)  # cell -> expiry step

    def add(self, frontier: Frontier, until: int) -> None:
        for c in frontier.cells:
            self.entries[c] = max(self.entries.get(c, 0), until)

    def blocks(self, frontier: Frontier, now: int) -> bool:
        return any(self.entries.get(c, 0) > now for c in frontier.cells)

    def prune(self, now: int) -> None:
        self.entries = {c: t for c, t in self.entries.items() if t > now}


def in_local_window(b: Belief, cell: Cell, radius: int) -> bool:
    cx, cy = b.robot.cell
    return abs(cell[0] - cx) <= radius and abs(cell[1] - cy) <= radius


def window_has_uncovered(b: Belief, radius: int) -> bool:
    from .gridworld import FREE

    cx, cy = b.robot.cell
    x0, x1 = max(0, cx - radius), min(b.width, cx + radius + 1)
    y0, y1 = max(0, cy - radius), min(b.height, cy + radius + 1)
    window_occ = b.known_occ[y0:y1, x0:x1]
    window_cov = b.covered[y0:y1, x0:x1]
    return bool(((window_occ == FREE) & ~window_cov).any())


def nearest_breadcrumb(g: GlobalIRM, cell: Cell) -> int:
    crumbs = g.breadcrumbs()
    if not crumbs:
        raise ValueError("global IRM has no breadcrumbs")
    return min(crumbs, key=lambda n: (math.hypot(n.cell[0] - cell[0],
                                                 n.cell[1] - cell[1]), n.id)).id


def plan_episode(b: Belief, g: GlobalIRM, prev: Plan | None, cfg: Config,
                 rng, blacklist: Blacklist | None = None,
                 frontiers: list[Frontier] | None = None) -> Plan:
    """One cascaded planning episode: global target selection, then either
    local coverage search or high-level transit instantiation."""
    radius = cfg.irm_local_radius
    anchor = nearest_breadcrumb(g, b.robot.cell)
    policy = solve_gcp(g, anchor, gamma=cfg.gcp_gamma,
                       lambda_cost=cfg.gcp_lambda_cost,
                       mu_frontier=cfg.gcp_mu_frontier, eps=cfg.gcp_eps_vi)

    if policy is None:
        # no reachable frontier: either exploration is finished or every
        # remaining frontier sits behind believed-untraversable terrain
        frontiers_remain = (bool(frontiers) if frontiers is not None
                            else (_window_has_unknown(b, radius)
                                  or window_has_uncovered(b, radius)))
        if not frontiers_remain:
            return Plan(mode=DONE, cells=[], created_at=b.step)
        return Plan(mode=RECOVERY, cells=[], created_at=b.step)
    else:
        target_cell = g.nodes[policy.target_frontier].cell
        if in_local_window(b, target_cell, radius):
            new = _local_plan(b, target_cell, cfg, rng)
            if not new.cells or new.value <= 1e-9:
                # local search found no profitable coverage path (e.g. the
                # frontier sits behind turns the macro actions cannot thread):
                # fall back to high-fidelity transit toward the target
                new = _transit_to(b, target_cell) or new
        else:
            new = _transit_plan(b, g, policy, cfg)

    return _tie_break(b, new, prev, cfg)


def _window_has_unknown(b: Belief, radius: int) -> bool:
    """True iff some known-Free window cell has an Unknown 4-neighbor.

    Mirrors the frontier definition: an Unknown cell with only diagonal
    known-Free contact sits behind a corner and is never sensed, so it must
    not keep the planner alive; neither can fully sealed pockets.
    """
    import numpy as np

    from .belief import UNKNOWN
    from .gridworld import FREE

    cx, cy = b.robot.cell
    x0, x1 = max(0, cx - radius), min(b.width, cx + radius + 1)
    y0, y1 = max(0, cy - radius), min(b.height, cy + radius + 1)
    occ = b.known_occ[y0:y1, x0:x1]
    free = occ == FREE
    unknown = occ == UNKNOWN
    near = np.zeros_like(unknown)
    near[:-1, :] |= unknown[1:, :]
    near[1:, :] |= unknown[:-1, :]
    near[:, :-1] |= unknown[:, 1:]
    near[:, 1:] |= unknown[:, :-1]
    return bool((free & near).any())


def _local_plan(b: Belief, theta: Cell | None, cfg: Config, rng) -> Plan:
    irm = rebuild_local_irm(b, cfg.irm_local_radius)
    lp = pomcp_plan(irm, b, theta, cfg.lcp_budget, rng,
                    r_sense=cfg.gridworld_r_sense, macro_len=cfg.lcp_macro_len,
                    depth=cfg.lcp_depth, gamma=cfg.lcp_gamma,
                    ucb_c=cfg.lcp_ucb_c, lambda_info=cfg.lcp_lambda_info,
                    lambda_cost=cfg.lcp_lambda_cost,
                    lambda_goal=cfg.lcp_lambda_goal, p_occ=cfg.lcp_p_occ)
    return Plan(mode=LOCAL_COVERAGE, cells=lp.cells, theta=theta,
                created_at=b.step, value=lp.value)


def _transit_plan(b: Belief, g: GlobalIRM, policy, cfg: Config) -> Plan:
    fid, node_path = frontier_goal(policy)
    target = g.nodes[fid].cell
    # the direct believed path is loop-free; the breadcrumb chain passes
    # through the anchor node, which can sit behind the robot
    direct = shortest_path(b, b.robot.cell, target)
    if direct is not None:
        cells = direct[0]
    else:
        cells = []
        cur = b.robot.cell
        for nid in node_path[1:]:
            wp = g.nodes[nid].cell
            seg = shortest_path(b, cur, wp)
            if seg is None:
                cells = []
                break
            cells.extend(seg[0])
            cur = wp
    value = policy.value.get(policy.anchor, 0.0)
    return Plan(mode=GLOBAL_TRANSIT, cells=cells, theta=target,
                created_at=b.step, value=value)


def _transit_to(b: Belief, target: Cell) -> Plan | None:
    if not b.is_known_free(target):
        return None
    sp = shortest_path(b, b.robot.cell, target)
    if sp is None or not sp[0]:
        return None
    return Plan(mode=GLOBAL_TRANSIT, cells=sp[0], theta=target,
                created_at=b.step, value=-sp[1])


def _tie_break(b: Belief, new: Plan, prev: Plan | None, cfg: Config) -> Plan:
    """Keep the previous plan when values are within the tie band and it is
    still executable, for motion consistency across replans."""
    if prev is None or prev.mode != new.mode or not prev.cells:
        return new
    if check_path(b, [b.robot.cell] + prev.cells) is not VALID:
        return new
    band = cfg.plgrim_eps_tie * max(abs(new.value), abs(prev.value), 1e-9)
    if abs(new.value - prev.value) < band:
        return prev
    return new


def execute_step(world: GridMap, b: Belief, plan: Plan,
                 cfg: Config) -> tuple[Belief, Plan, object]:
    """Take one committed lattice step, sense, integrate, and re-check the
    remaining plan. Returns (belief, remaining plan, Ok | PlanInvalidated)."""
    if plan.mode == DONE:
        raise ValueError("cannot execute a Done plan")
    target = plan.cells[0]
    assert b.is_known_free(target), f"committed step onto non-known-Free {target}"
    q = step(world, b.robot, target)
    b.robot = q
    b.step += 1
    z = sense(world, q, cfg.gridworld_r_sense)
    from .belief import integrate

    integrate(b, z)
    remainder = replace(plan, cells=plan.cells[1:])
    bad = check_path(b, [q.cell] + remainder.cells)
    event = OK if bad is VALID else PlanInvalidated(bad)
    return b, remainder, event


def resiliency_step(b: Belief, stage: int, cfg: Config,
                    frontiers: list[Frontier] | None = None,
                    blacklist: Blacklist | None = None) -> Belief:
    """Escalating recovery: 1) reset local-window risk to prior, 2) raise the
    risk threshold, 3) raise again and blacklist the nearest frontier."""
    radius = cfg.irm_local_radius
    if stage <= 1:
        cx, cy = b.robot.cell
        x0, x1 = max(0, cx - radius), min(b.width, cx + radius + 1)
        y0, y1 = max(0, cy - radius), min(b.height, cy + radius + 1)
        b.risk.mean[y0:y1, x0:x1] = 0.5
        b.risk.conf[y0:y1, x0:x1] = 0.0
        b.risk.last_t[y0:y1, x0:x1] = b.step
    elif stage == 2:
        raise_risk_threshold(b.risk, cfg.plgrim_recover_factor)
    else:
        raise_risk_threshold(b.risk, cfg.plgrim_recover_factor)
        # only blacklist when an alternate frontier remains to retarget
        if frontiers and len(frontiers) > 1 and blacklist is not None:
            cx, cy = b.robot.cell
            nearest = min(frontiers,
                          key=lambda f: (math.hypot(f.centroid[0] - cx,
                                                    f.centroid[1] - cy),
                                         f.centroid))
            blacklist.add(nearest, b.step + cfg.plgrim_t_blacklist)
    return b


class PlgrimPlanner:
    """Stateful episode planner: IRM upkeep, blacklist, recovery staging."""

    name = "plgrim"

    def __init__(self, cfg: Config, rng):
        self.cfg = cfg
        self.rng = rng
        self.girm = GlobalIRM()
        self.blacklist = Blacklist()
        self.recovery_stage = 0
        self._last_covered = -1
        self._stagnant = 0
        self._escape = False

    def observe(self, b: Belief) -> list[Frontier]:
        preferred = [f for f in detect_frontiers(b, self.cfg.irm_min_frontier_size)
                     if not self.blacklist.blocks(f, b.step)]
        frontiers = preferred
        if not frontiers:
            # below-threshold clusters still gate completeness
            frontiers = [f for f in detect_frontiers(b, 1)
                         if not self.blacklist.blocks(f, b.step)]
        update_global_irm(self.girm, b, frontiers, d_bc=self.cfg.irm_d_bc,
                          r_connect=self.cfg.irm_r_connect)
        if frontiers and not self.girm.frontier_nodes():
            # every preferred frontier sits in a sensed-but-disconnected
            # pocket; widen to all clusters so reachable ones can attach
            widened = [f for f in detect_frontiers(b, 1)
                       if not self.blacklist.blocks(f, b.step)]
            if len(widened) > len(frontiers):
                frontiers = widened
                update_global_irm(self.girm, b, frontiers,
                                  d_bc=self.cfg.irm_d_bc,
                                  r_connect=self.cfg.irm_r_connect)
        return frontiers

    def plan(self, b: Belief, prev: Plan | None) -> Plan:
        self.blacklist.prune(b.step)
        frontiers = self.observe(b)
        covered_now = int(b.covered.sum())
        if covered_now > self._last_covered:
            self._last_covered = covered_now
            self._stagnant = 0
            self._escape = False
        else:
            self._stagnant += 1
        if (self._escape and prev is not None and prev.mode == GLOBAL_TRANSIT
                and prev.cells
                and check_path(b, [b.robot.cell] + prev.cells) is VALID):
            return prev
        new = plan_episode(b, self.girm, prev, self.cfg, self.rng,
                           self.blacklist, frontiers=frontiers)
        # local search can chase coverage that exists only in sampled
        # particles; once replanning stops producing real gains, commit to
        # transit toward the global target until sensing something new
        if (self._stagnant >= self.cfg.plgrim_f_recover
                and new.mode == LOCAL_COVERAGE and new.theta is not None):
            esc = _transit_to(b, new.theta)
            if esc is not None and esc.cells:
                self._escape = True
                return esc
        return new

    def recover(self, b: Belief) -> Belief:
        self.recovery_stage += 1
        frontiers = detect_frontiers(b, self.cfg.irm_min_frontier_size)
        return resiliency_step(b, self.recovery_stage, self.cfg,
                               frontiers=frontiers, blacklist=self.blacklist)


__all__ = [
    "LOCAL_COVERAGE", "GLOBAL_TRANSIT", "RECOVERY", "DONE", "OK",
    "PlanInvalidated", "Plan", "Blacklist", "PlgrimPlanner",
    "plan_episode", "execute_step", "resiliency_step",
    "in_local_window", "window_has_uncovered", "nearest_breadcrumb",
]

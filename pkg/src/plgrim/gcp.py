"""Global coverage planner: frontier-terminal value iteration on the Global IRM.

Frontier nodes are absorbing with value mu_frontier * size; interior nodes
back up max over neighbors of -lambda_cost*c + gamma**c * V(neighbor), with
cost-exponent discounting so value does not depend on breadcrumb spacing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .irm import FRONTIER, GlobalIRM

MAX_SWEEPS = 10_000

# zero-cost edges (coincident nodes) would make greedy cycles value-neutral
MIN_EDGE_COST = 1e-6


@dataclass
class GlobalPolicy:
    successor: dict[int, int]        # node id -> best next node id
    value: dict[int, float]
    target_frontier: int             # frontier node id reached from the anchor
    anchor: int                      # robot-anchored node id
    sweeps: int


def solve_gcp(g: GlobalIRM, at: int, *, gamma: float = 0.95,
              lambda_cost: float = 0.05, mu_frontier: float = 1.0,
              eps: float = 1e-6) -> GlobalPolicy | None:
    """Value-iterate to a greedy frontier-seeking policy; None when no
    frontier exists or none is reachable from the anchor node."""
    if at not in g.nodes:
        raise KeyError(f"anchor node {at} not in graph")
    frontier_ids = {n.id for n in g.nodes.values() if n.label == FRONTIER}
    if not frontier_ids:
        return None
    # interior nodes start at -inf so values can only come from actual paths
    # to a frontier; a zero init lets negative cycling fixed points survive
    value: dict[int, float] = {}
    for nid, node in g.nodes.items():
        value[nid] = mu_frontier * node.size if nid in frontier_ids else -math.inf
    sweeps = 0
    node_order = sorted(g.nodes)
    while True:
        sweeps += 1
        if sweeps > MAX_SWEEPS:
            raise RuntimeError("value iteration failed to converge")
        delta = 0.0
        for nid in node_order:
            if nid in frontier_ids:
                continue
            best = None
            for m, cost in sorted(g.edges[nid].items()):
                c = max(cost, MIN_EDGE_COST)
                v = -lambda_cost * c + (gamma ** c) * value[m]
                if best is None or v > best:
                    best = v
            if best is None or best == value[nid]:
                continue  # isolated node or unchanged (possibly still -inf)
            delta = max(delta, abs(best - value[nid]))
            value[nid] = best
        if delta < eps:
            break
    successor: dict[int, int] = {}
    for nid in node_order:
        if nid in frontier_ids:
            continue
        best = None
        for m, cost in sorted(g.edges[nid].items()):
            c = max(cost, MIN_EDGE_COST)
            v = -lambda_cost * c + (gamma ** c) * value[m]
            if best is None or v > best[0] + 1e-12:
                best = (v, m)
        if best is not None and best[0] > -math.inf:
            successor[nid] = best[1]
    # follow the greedy chain from the anchor
    target = _reachable_frontier(successor, frontier_ids, at, len(g.nodes))
    if target is None:
        return None
    return GlobalPolicy(successor=successor, value=value,
                        target_frontier=target, anchor=at, sweeps=sweeps)


def _reachable_frontier(successor, frontier_ids, at, n_nodes) -> int | None:
    cur = at
    for _ in range(n_nodes + 1):
        if cur in frontier_ids:
            return cur
        if cur not in successor:
            return None
        cur = successor[cur]
    return None


def frontier_goal(p: GlobalPolicy) -> tuple[int, list[int]]:
    """(target frontier id, node-id path from the anchor to it)."""
    path = [p.anchor]
    seen = {p.anchor}
    cur = p.anchor
    while cur != p.target_frontier:
        cur = p.successor[cur]
        assert cur not in seen, "cyclic successor map"
        seen.add(cur)
        path.append(cur)
    return p.target_frontier, path


__all__ = ["GlobalPolicy", "solve_gcp", "frontier_goal", "MAX_SWEEPS"]

"""Hierarchical information roadmaps.

Local IRM: dense lattice over a Chebyshev window around the robot with
coverage/CVaR annotations. Global IRM: sparse breadcrumb backbone dropped
along the traversed path plus frontier nodes re-attached wholesale after
every frontier detection pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .belief import Belief, dijkstra_multi, shortest_path
from .gridworld import DIRECTIONS, FREE, Cell
from .kernels import los_blocked
from .risk import UNTRAVERSABLE, edge_risk_cost

FOUR_NEIGHBORS = ((0, -1), (1, 0), (0, 1), (-1, 0))


@dataclass(frozen=True)
class Frontier:
    cells: frozenset[Cell]
    centroid: Cell
    size: int


def detect_frontiers(b: Belief, min_size: int = 2) -> list[Frontier]:
    """Maximal 8-connected clusters of known-Free cells bordering Unknown."""
    from .belief import UNKNOWN
    import numpy as np

    h, w = b.height, b.width
    free = b.known_occ == FREE
    unknown = b.known_occ == UNKNOWN
    near_unknown = np.zeros((h, w), dtype=bool)
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:, :-1] |= unknown[:, 1:]
    near_unknown[:, 1:] |= unknown[:, :-1]
    ys, xs = np.nonzero(free & near_unknown)
    border: set[Cell] = {(int(x), int(y)) for x, y in zip(xs, ys)}
    frontiers: list[Frontier] = []
    seen: set[Cell] = set()
    for cell in sorted(border):
        if cell in seen:
            continue
        cluster = [cell]
        seen.add(cell)
        stack = [cell]
        while stack:
            cx, cy = stack.pop()
            for dx, dy in DIRECTIONS:
                n = (cx + dx, cy + dy)
                if n in border and n not in seen:
                    seen.add(n)
                    cluster.append(n)
                    stack.append(n)
        if len(cluster) < min_size:
            continue
        mx = sum(c[0] for c in cluster) / len(cluster)
        my = sum(c[1] for c in cluster) / len(cluster)
        centroid = min(cluster, key=lambda c: ((c[0] - mx) ** 2 + (c[1] - my) ** 2, c))
        frontiers.append(Frontier(cells=frozenset(cluster), centroid=centroid,
                                  size=len(cluster)))
    frontiers.sort(key=lambda f: (-f.size, f.centroid))
    return frontiers


@dataclass
class LocalIRM:
    center: Cell
    radius: int
    nodes: dict[Cell, dict]            # cell -> {covered, cvar, confidence}
    edges: dict[tuple[Cell, Cell], float]  # (a, b) with a < b -> cost

    def contains(self, cell: Cell) -> bool:
        return cell in self.nodes

    def in_window(self, cell: Cell) -> bool:
        return (abs(cell[0] - self.center[0]) <= self.radius
                and abs(cell[1] - self.center[1]) <= self.radius)

    def neighbors(self, cell: Cell):
        for dx, dy in DIRECTIONS:
            n = (cell[0] + dx, cell[1] + dy)
            key = (cell, n) if cell < n else (n, cell)
            if key in self.edges:
                yield n, self.edges[key]


def rebuild_local_irm(b: Belief, radius: int) -> LocalIRM:
    """Dense lattice over the rolling window centered at the robot."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    cx, cy = b.robot.cell
    cvar = b.risk.cvar_grid()
    nodes: dict[Cell, dict] = {}
    for y in range(max(0, cy - radius), min(b.height, cy + radius + 1)):
        for x in range(max(0, cx - radius), min(b.width, cx + radius + 1)):
            if b.known_occ[y, x] != FREE:
                continue
            if cvar[y, x] > b.risk.r_max and (x, y) != (cx, cy):
                continue  # untraversable node; keep the robot's own cell
            nodes[(x, y)] = {
                "covered": bool(b.covered[y, x]),
                "cvar": float(cvar[y, x]),
                "confidence": float(b.risk.conf[y, x]),
            }
    edges: dict[tuple[Cell, Cell], float] = {}
    for cell in nodes:
        x, y = cell
        for dx, dy in DIRECTIONS:
            n = (x + dx, y + dy)
            if n <= cell or n not in nodes:
                continue
            c = edge_risk_cost(b.risk, cell, n)
            if c != UNTRAVERSABLE:
                edges[(cell, n)] = c
    return LocalIRM(center=(cx, cy), radius=radius, nodes=nodes, edges=edges)


BREADCRUMB = "Breadcrumb"
FRONTIER = "Frontier"


@dataclass
class GlobalNode:
    id: int
    label: str
    cell: Cell
    visit_step: int = 0      # breadcrumbs: step when dropped
    size: int = 0            # frontiers: member cell count
    cells: frozenset = frozenset()


@dataclass
class GlobalIRM:
    nodes: dict[int, GlobalNode] = field(default_factory=dict)
    edges: dict[int, dict[int, float]] = field(default_factory=dict)
    next_id: int = 0
    last_bc_distance: float = -math.inf  # distance_traveled at last breadcrumb

    def add_node(self, node_label: str, cell: Cell, **attrs) -> int:
        nid = self.next_id
        self.next_id += 1
        self.nodes[nid] = GlobalNode(id=nid, label=node_label, cell=cell, **attrs)
        self.edges[nid] = {}
        return nid

    def add_edge(self, a: int, b: int, cost: float) -> None:
        self.edges[a][b] = cost
        self.edges[b][a] = cost

    def remove_node(self, nid: int) -> None:
        for other in list(self.edges[nid]):
            del self.edges[other][nid]
        del self.edges[nid]
        del self.nodes[nid]

    def breadcrumbs(self) -> list[GlobalNode]:
        return [n for n in self.nodes.values() if n.label == BREADCRUMB]

    def frontier_nodes(self) -> list[GlobalNode]:
        return [n for n in self.nodes.values() if n.label == FRONTIER]

    def dump(self) -> str:
        """Plain-text debug export: one node/edge per line."""
        lines = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            lines.append(f"node {nid} {n.label} {n.cell[0]} {n.cell[1]} size={n.size}")
        for a in sorted(self.edges):
            for bb in sorted(self.edges[a]):
                if a < bb:
                    lines.append(f"edge {a} {bb} {self.edges[a][bb]:.6f}")
        return "\n".join(lines) + "\n"


def _believed_los(b: Belief, a: Cell, c: Cell) -> bool:
    if a == c:
        return True
    blocked = (b.known_occ != FREE).astype("uint8")
    return not los_blocked(blocked, a[0], a[1], c[0], c[1])


def update_global_irm(g: GlobalIRM, b: Belief, frontiers: list[Frontier],
                      *, d_bc: float = 2.0, r_connect: float = 6.0) -> GlobalIRM:
    """Drop breadcrumbs along travel and re-attach the fresh frontier set.

    A breadcrumb is appended once the robot has traveled >= d_bc since the
    last one; it is edged to the previous breadcrumb and to any breadcrumb
    within r_connect with believed line of sight. Frontier nodes are replaced
    wholesale; each attaches to its nearest breadcrumb by believed path cost,
    and unreachable frontiers are dropped for this cycle.
    """
    cs = b.risk.cell_size
    crumbs = g.breadcrumbs()
    if not crumbs:
        nid = g.add_node(BREADCRUMB, b.robot.cell, visit_step=b.step)
        g.last_bc_distance = b.robot.distance_traveled
        crumbs = [g.nodes[nid]]
    elif b.robot.distance_traveled - g.last_bc_distance >= d_bc:
        if any(c.cell == b.robot.cell for c in crumbs):
            g.last_bc_distance = b.robot.distance_traveled
            return _refresh_frontiers(g, b, frontiers)
        prev = crumbs[-1]
        nid = g.add_node(BREADCRUMB, b.robot.cell, visit_step=b.step)
        node = g.nodes[nid]
        sp = shortest_path(b, prev.cell, node.cell) if b.is_known_free(prev.cell) else None
        cost = sp[1] if sp else math.hypot(node.cell[0] - prev.cell[0],
                                           node.cell[1] - prev.cell[1]) * cs
        g.add_edge(prev.id, nid, cost)
        for other in crumbs[:-1]:
            d = math.hypot(other.cell[0] - node.cell[0],
                           other.cell[1] - node.cell[1]) * cs
            if d <= r_connect and _believed_los(b, node.cell, other.cell):
                sp = shortest_path(b, other.cell, node.cell)
                if sp is not None:
                    g.add_edge(other.id, nid, sp[1])
        g.last_bc_distance = b.robot.distance_traveled
        crumbs = g.breadcrumbs()
    return _refresh_frontiers(g, b, frontiers)


def _refresh_frontiers(g: GlobalIRM, b: Belief,
                       frontiers: list[Frontier]) -> GlobalIRM:
    """Wholesale frontier-node replacement with nearest-breadcrumb attachment."""
    crumbs = g.breadcrumbs()
    for fnode in g.frontier_nodes():
        g.remove_node(fnode.id)
    # one multi-source sweep from every breadcrumb; edge costs are symmetric,
    # so each centroid's nearest crumb (ties to the lowest id) falls out of it
    crumb_cells: dict[Cell, int] = {}
    for c in sorted(crumbs, key=lambda n: n.id):
        crumb_cells.setdefault(c.cell, c.id)
    dist, origin = dijkstra_multi(b, list(crumb_cells))
    for f in frontiers:
        if f.centroid not in dist:
            continue  # unreachable this cycle
        nid = g.add_node(FRONTIER, f.centroid, size=f.size, cells=f.cells)
        g.add_edge(crumb_cells[origin[f.centroid]], nid, dist[f.centroid])
    return g


VALID = None


def check_path(b: Belief, cells: list[Cell]) -> int | None:
    """First edge index that is Untraversable or leaves known-Free space.

    cells is the remaining waypoint sequence starting at the robot's current
    cell. Returns None when the whole path is still valid.
    """
    for i in range(len(cells) - 1):
        a, c = cells[i], cells[i + 1]
        if not b.is_known_free(c):
            return i
        if edge_risk_cost(b.risk, a, c) == UNTRAVERSABLE:
            return i
    return VALID


__all__ = [
    "Frontier", "LocalIRM", "GlobalIRM", "GlobalNode",
    "BREADCRUMB", "FRONTIER", "VALID",
    "detect_frontiers", "rebuild_local_irm", "update_global_irm", "check_path",
]

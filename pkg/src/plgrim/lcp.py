"""Local coverage planner: Monte-Carlo tree search over macro actions.

Plans on the local window by sampling occupancy particles for unknown cells,
selecting macro actions with UCB1, and backing up discounted rewards of
(info gained) - (risk-weighted travel cost) - (goal-shaping distance).
Optimism about unknown space lives entirely inside rollouts; the returned
policy's committed prefix is validated against known-Free cells only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .belief import UNKNOWN, Belief
from .gridworld import FREE, OCCUPIED, Cell
from .irm import LocalIRM
from .kernels import visible_mask

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MacroAction:
    steps: tuple[Cell, ...]  # unit moves (dx, dy), length == macro_len

    @property
    def displacement(self) -> Cell:
        return (sum(s[0] for s in self.steps), sum(s[1] for s in self.steps))


def candidate_actions(macro_len: int) -> list[MacroAction]:
    """8 straight headings plus 8 single-turn L shapes (clockwise turn)."""
    def turn_cw(d: Cell) -> Cell:
        idx = _DIR8.index(d)
        return _DIR8[(idx + 2) % 8]

    actions = []
    for d in _DIR8:
        actions.append(MacroAction(steps=(d,) * macro_len))
    half = (macro_len + 1) // 2
    for d in _DIR8:
        t = turn_cw(d)
        actions.append(MacroAction(steps=(d,) * half + (t,) * (macro_len - half)))
    return actions


# compass-ordered ring used for the turn geometry
_DIR8: tuple[Cell, ...] = ((0, -1), (1, -1), (1, 0), (1, 1),
                           (0, 1), (-1, 1), (-1, 0), (-1, -1))


@dataclass
class SearchNode:
    visits: int = 0
    child_visits: dict[int, int] = field(default_factory=dict)
    child_values: dict[int, float] = field(default_factory=dict)
    children: dict[int, "SearchNode"] = field(default_factory=dict)


@dataclass
class LocalPolicy:
    actions: list[MacroAction]
    cells: list[Cell]            # committed waypoint cells (known-Free only)
    value: float
    reward_trace: list[float]
    simulations: int


class WindowModel:
    """Window-local generative model shared by all simulations of one call."""

    def __init__(self, irm: LocalIRM, b: Belief, theta: Cell | None, *,
                 r_sense: float, cell_size: float, r_max: float,
                 lambda_risk: float, lambda_info: float, lambda_cost: float,
                 lambda_goal: float, p_occ: float, macro_len: int):
        cx, cy = b.robot.cell
        r = irm.radius
        self.x0 = max(0, cx - r)
        self.y0 = max(0, cy - r)
        x1 = min(b.width, cx + r + 1)
        y1 = min(b.height, cy + r + 1)
        self.w = x1 - self.x0
        self.h = y1 - self.y0
        self.origin = (cx - self.x0, cy - self.y0)
        self.known = b.known_occ[self.y0:y1, self.x0:x1]
        self.covered0 = b.covered[self.y0:y1, self.x0:x1].copy()
        cvar = b.risk.cvar_grid()[self.y0:y1, self.x0:x1]
        self.unknown = self.known == UNKNOWN
        # risk value used in rollout costs: CVaR where known, prior mean else
        self.riskval = np.where(self.unknown, 0.5, cvar)
        # known-Free cells past the CVaR threshold block movement but not LOS
        self.hot = (self.known == FREE) & (cvar > r_max)
        self.hot[self.origin[1], self.origin[0]] = False
        self.known_occ8 = (self.known == OCCUPIED).astype(np.uint8)
        self.r_cells = r_sense / cell_size
        self.cell_size = cell_size
        self.lambda_risk = lambda_risk
        self.lambda_info = lambda_info
        self.lambda_cost = lambda_cost
        self.lambda_goal = lambda_goal
        self.p_occ = p_occ
        self.macro_len = macro_len
        self.actions = candidate_actions(macro_len)
        self.theta = None
        if theta is not None:
            self.theta = (theta[0] - self.x0, theta[1] - self.y0)
        self.fully_known = not bool(self.unknown.any())
        self._mask_cache: dict[Cell, np.ndarray] = {}
        self._legal_known: dict[Cell, list[int]] = {}
        # on a fully known window, visible & free per view cell is constant
        self._visfree_cache: dict[Cell, np.ndarray] = {}
        # actions grouped by first step: legality of all 16 candidates is
        # decided by at most 8 neighbor probes
        groups: dict[Cell, list[int]] = {}
        for i, a in enumerate(self.actions):
            groups.setdefault(a.steps[0], []).append(i)
        self._dir_groups = [(d, tuple(idx)) for d, idx in groups.items()]
        self._free = self.known_occ8 == 0
        self._newly = np.empty_like(self.covered0)

    # -- particles --------------------------------------------------------

    def sample_particle(self, rng: np.random.Generator) -> np.ndarray:
        """Occupancy grid with Unknown cells drawn Occupied w.p. p_occ."""
        if self.fully_known:
            self._free = self.known_occ8 == 0
            return self.known_occ8
        occ = self.known_occ8.copy()
        draws = rng.random(int(self.unknown.sum())) < self.p_occ
        occ[self.unknown] = draws.astype(np.uint8)
        self._free = occ == 0
        return occ

    # -- dynamics ---------------------------------------------------------

    def in_window(self, c: Cell) -> bool:
        return 0 <= c[0] < self.w and 0 <= c[1] < self.h

    def legal_actions(self, cell: Cell, occ: np.ndarray, *, known_only: bool) -> list[int]:
        """Indices of actions whose first step is passable from cell."""
        if known_only:
            cached = self._legal_known.get(cell)
            if cached is not None:
                return cached
        out: list[int] = []
        x, y = cell
        for (dx, dy), idx in self._dir_groups:
            tx, ty = x + dx, y + dy
            if not (0 <= tx < self.w and 0 <= ty < self.h) or self.hot[ty, tx]:
                continue
            if known_only:
                if self.known[ty, tx] != FREE:
                    continue
            elif occ[ty, tx] != 0:
                continue
            out.extend(idx)
        out.sort()
        if known_only:
            self._legal_known[cell] = out
        return out

    def sense_mask(self, cell: Cell, occ: np.ndarray) -> np.ndarray:
        if self.fully_known:
            m = self._mask_cache.get(cell)
            if m is None:
                m = visible_mask(occ, cell[0], cell[1], self.r_cells)
                self._mask_cache[cell] = m
            return m
        return visible_mask(occ, cell[0], cell[1], self.r_cells)

    def apply_action(self, cell: Cell, action_idx: int, occ: np.ndarray,
                     sim_covered: np.ndarray) -> tuple[Cell, float]:
        """Execute a macro action on a particle; returns (end cell, reward).

        Steps blocked by the particle's occupancy truncate the action; the
        reward is computed over the traversed prefix (Eq.-of-record:
        lambda_info * newly covered - lambda_cost * risk-weighted length,
        minus goal shaping when a target frontier is set).
        """
        new_cells = 0
        cost = 0.0
        cur = cell
        for dx, dy in self.actions[action_idx].steps:
            t = (cur[0] + dx, cur[1] + dy)
            if not self.in_window(t) or occ[t[1], t[0]] != 0 or self.hot[t[1], t[0]]:
                break
            length = self.cell_size * (SQRT2 if dx != 0 and dy != 0 else 1.0)
            rv = 0.5 * (self.riskval[cur[1], cur[0]] + self.riskval[t[1], t[0]])
            cost += length * (1.0 + self.lambda_risk * rv)
            cur = t
            newly = self._newly
            if self.fully_known:
                vf = self._visfree_cache.get(cur)
                if vf is None:
                    vf = self.sense_mask(cur, occ) & self._free
                    self._visfree_cache[cur] = vf
                np.greater(vf, sim_covered, out=newly)  # vf & ~sim_covered
            else:
                vis = self.sense_mask(cur, occ)
                np.logical_and(vis, self._free, out=newly)
                np.greater(newly, sim_covered, out=newly)
            n = int(np.count_nonzero(newly))
            if n:
                new_cells += n
                sim_covered |= newly
        r = self.lambda_info * new_cells - self.lambda_cost * cost
        if self.theta is not None:
            d = math.hypot(cur[0] - self.theta[0], cur[1] - self.theta[1]) * self.cell_size
            r -= self.lambda_goal * d
        return cur, r


def sample_particle(b: Belief, rng: np.random.Generator, *, radius: int,
                    p_occ: float = 0.2) -> np.ndarray:
    """Window-local occupancy particle (module-level convenience)."""
    from .irm import rebuild_local_irm

    irm = rebuild_local_irm(b, radius)
    model = _default_model(irm, b, None, p_occ=p_occ)
    return model.sample_particle(rng).copy()


def rollout_reward(model: WindowModel, particle: np.ndarray, q: Cell,
                   action: int | MacroAction,
                   sim_covered: np.ndarray | None = None) -> float:
    """Reward of one macro action on one particle, from window cell q."""
    if isinstance(action, MacroAction):
        try:
            idx = model.actions.index(action)
        except ValueError:
            model.actions.append(action)
            idx = len(model.actions) - 1
    else:
        idx = action
    if sim_covered is None:
        sim_covered = model.covered0.copy()
    model._free = particle == 0
    _, r = model.apply_action(q, idx, particle, sim_covered)
    return r


def _default_model(irm: LocalIRM, b: Belief, theta, **kw) -> WindowModel:
    defaults = dict(r_sense=4.0, cell_size=b.risk.cell_size, r_max=b.risk.r_max,
                    lambda_risk=b.risk.lambda_risk, lambda_info=1.0,
                    lambda_cost=0.5, lambda_goal=0.3, p_occ=0.2, macro_len=4)
    defaults.update(kw)
    return WindowModel(irm, b, theta, **defaults)


def pomcp_plan(irm: LocalIRM, b: Belief, theta: Cell | None, budget: int,
               rng: np.random.Generator, *, r_sense: float = 4.0,
               macro_len: int = 4, depth: int = 3, gamma: float = 0.9,
               ucb_c: float = 1.4, lambda_info: float = 1.0,
               lambda_cost: float = 0.5, lambda_goal: float = 0.3,
               p_occ: float = 0.2) -> LocalPolicy:
    """Run `budget` simulations and return the greedy root macro-action plan."""
    model = WindowModel(irm, b, theta, r_sense=r_sense,
                        cell_size=b.risk.cell_size, r_max=b.risk.r_max,
                        lambda_risk=b.risk.lambda_risk, lambda_info=lambda_info,
                        lambda_cost=lambda_cost, lambda_goal=lambda_goal,
                        p_occ=p_occ, macro_len=macro_len)
    root = SearchNode()
    root_cell = model.origin
    if not model.legal_actions(root_cell, model.known_occ8, known_only=True):
        return LocalPolicy(actions=[], cells=[], value=0.0, reward_trace=[],
                           simulations=0)

    for _ in range(int(budget)):
        occ = model.sample_particle(rng)
        sim_covered = model.covered0.copy()
        _simulate(model, root, root_cell, occ, sim_covered, depth, gamma, ucb_c,
                  rng, at_root=True)

    # greedy extraction: most-visited child, ties by value then index
    actions: list[MacroAction] = []
    trace: list[float] = []
    node = root
    cur = root_cell
    best_q = 0.0
    first = True
    while node.child_visits:
        scored = [(node.child_visits[i], node.child_values[i], -i)
                  for i in node.child_visits]
        n_vis, q, neg_i = max(scored)
        i = -neg_i
        if first:
            best_q = node.child_values[i]
        actions.append(model.actions[i])
        trace.append(node.child_values[i])
        cur = _known_end(model, cur, i)
        node = node.children.get(i) or SearchNode()
        first = False

    if theta is None and best_q <= 1e-12:
        # nothing worth doing locally: report a zero-value stay policy
        return LocalPolicy(actions=[], cells=[], value=0.0, reward_trace=[],
                           simulations=int(budget))

    cells = _committed_cells(model, b, actions)
    return LocalPolicy(actions=actions, cells=cells, value=best_q,
                       reward_trace=trace, simulations=int(budget))


def _simulate(model: WindowModel, node: SearchNode, cell: Cell,
              occ: np.ndarray, sim_covered: np.ndarray, depth: int,
              gamma: float, ucb_c: float, rng: np.random.Generator,
              *, at_root: bool = False) -> float:
    if depth == 0:
        return 0.0
    legal = model.legal_actions(cell, occ, known_only=at_root)
    if not legal:
        return 0.0
    untried = [i for i in legal if i not in node.child_visits]
    if untried:
        i = untried[0]
        nxt, r = model.apply_action(cell, i, occ, sim_covered)
        total = r + gamma * _rollout(model, nxt, occ, sim_covered, depth - 1,
                                     gamma, rng)
        child = SearchNode()
        node.children[i] = child
        node.child_visits[i] = 1
        node.child_values[i] = total
        node.visits += 1
        return total
    # UCB1 selection among legal tried actions
    log_n = math.log(max(node.visits, 1))
    best_i, best_u = -1, -math.inf
    for i in legal:
        n_a = node.child_visits[i]
        u = node.child_values[i] + ucb_c * math.sqrt(log_n / n_a)
        if u > best_u:
            best_u, best_i = u, i
    i = best_i
    nxt, r = model.apply_action(cell, i, occ, sim_covered)
    total = r + gamma * _simulate(model, node.children[i], nxt, occ,
                                  sim_covered, depth - 1, gamma, ucb_c, rng)
    node.visits += 1
    node.child_visits[i] += 1
    node.child_values[i] += (total - node.child_values[i]) / node.child_visits[i]
    return total


def _rollout(model: WindowModel, cell: Cell, occ: np.ndarray,
             sim_covered: np.ndarray, depth: int, gamma: float,
             rng: np.random.Generator) -> float:
    total = 0.0
    discount = 1.0
    cur = cell
    for _ in range(depth):
        legal = model.legal_actions(cur, occ, known_only=False)
        if not legal:
            break
        i = legal[int(rng.integers(len(legal)))]
        cur, r = model.apply_action(cur, i, occ, sim_covered)
        total += discount * r
        discount *= gamma
    return total


def _known_end(model: WindowModel, cell: Cell, action_idx: int) -> Cell:
    cur = cell
    for dx, dy in model.actions[action_idx].steps:
        t = (cur[0] + dx, cur[1] + dy)
        if not model.in_window(t) or model.known[t[1], t[0]] != FREE \
                or model.hot[t[1], t[0]]:
            break
        cur = t
    return cur


def _committed_cells(model: WindowModel, b: Belief,
                     actions: list[MacroAction]) -> list[Cell]:
    """Global-frame waypoints truncated at the first non-known-Free cell."""
    cells: list[Cell] = []
    cur = model.origin
    for a in actions:
        for dx, dy in a.steps:
            t = (cur[0] + dx, cur[1] + dy)
            if not model.in_window(t) or model.known[t[1], t[0]] != FREE \
                    or model.hot[t[1], t[0]]:
                return cells
            cur = t
            cells.append((t[0] + model.x0, t[1] + model.y0))
    return cells


__all__ = ["MacroAction", "SearchNode", "LocalPolicy", "WindowModel",
           "candidate_actions", "pomcp_plan", "rollout_reward",
           "sample_particle"]

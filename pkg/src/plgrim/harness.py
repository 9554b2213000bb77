"""Episode runner, environment generators, metrics, and planner comparison."""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import HfePlanner, NbvPlanner
from .belief import Belief, integrate
from .config import Config
from .gridworld import (FREE, OCCUPIED, GridMap, RobotState, load_map, sense)
from .planner import DONE, OK, PlgrimPlanner, execute_step
from .risk import RiskMap
from .rng import substream

PLANNERS = {"plgrim": PlgrimPlanner, "nbv": NbvPlanner, "hfe": HfePlanner}

METRICS_HEADER = "step,time_s,coverage,distance_m,mode,replans,recoveries"
COMPARE_HEADER = "time_s,planner,mean_coverage,median_coverage,n_runs"


@dataclass(frozen=True)
class EpisodeConfig:
    planner: str
    seed: int
    map_file: str | None = None
    map_gen: str | None = None
    map_text: str | None = None
    max_steps: int | None = None
    overrides: dict = field(default_factory=dict)

    def map_source(self) -> str:
        return self.map_text or self.map_file or self.map_gen or ""


@dataclass
class StepRecord:
    step: int
    time_s: float
    coverage: float
    distance_m: float
    mode: str
    replans: int
    recoveries: int


@dataclass
class Metrics:
    records: list[StepRecord]
    final_coverage: float
    steps_to_90: int | None
    total_distance: float
    done: bool


def metrics_to_csv(m: Metrics) -> str:
    out = io.StringIO()
    out.write(METRICS_HEADER + "\n")
    for r in m.records:
        out.write(f"{r.step},{r.time_s:.6f},{r.coverage:.6f},"
                  f"{r.distance_m:.6f},{r.mode},{r.replans},{r.recoveries}\n")
    return out.getvalue()


def resolve_map(cfg: EpisodeConfig) -> GridMap:
    if cfg.map_text is not None:
        return load_map(cfg.map_text)
    if cfg.map_file is not None:
        with open(cfg.map_file) as f:
            return load_map(f.read())
    if cfg.map_gen is not None:
        return generate_from_spec(cfg.map_gen, cfg.seed)
    raise ValueError("episode config has no map source")


def generate_from_spec(spec: str, seed: int) -> GridMap:
    """Parse generator specs like 'maze:41x41:d0.1' or 'subway:2'."""
    parts = spec.split(":")
    kind = parts[0]
    if kind == "subway":
        scale = int(parts[1]) if len(parts) > 1 else 1
        return generate_subway(scale, seed)
    if kind == "maze":
        if len(parts) < 2 or "x" not in parts[1]:
            raise ValueError(f"bad maze spec: {spec!r}")
        w, h = (int(v) for v in parts[1].split("x"))
        density = 0.0
        for extra in parts[2:]:
            if extra.startswith("d"):
                density = float(extra[1:])
        return generate_maze(w, h, seed, density)
    raise ValueError(f"unknown map generator kind: {kind!r}")


def start_cell(world: GridMap):
    if world.start is not None:
        return world.start
    return min(world.free_cells())


def initial_belief(world: GridMap, config: Config) -> Belief:
    robot = RobotState(cell=start_cell(world), speed=config.gridworld_speed)
    risk = RiskMap(world.width, world.height,
                   cell_size=config.gridworld_cell_size,
                   alpha=config.risk_alpha, r_max=config.risk_r_max,
                   d0=config.risk_d0, tau=config.risk_tau,
                   sigma_prior=config.risk_sigma_prior,
                   sigma_min=config.risk_sigma_min,
                   lambda_risk=config.risk_lambda_risk)
    b = Belief.initial(world.width, world.height, robot, risk)
    z = sense(world, robot, config.gridworld_r_sense)
    integrate(b, z)
    return b


def run_episode(cfg: EpisodeConfig) -> Metrics:
    """Deterministic closed loop: replan on trigger, step, sense, record."""
    if cfg.planner not in PLANNERS:
        raise ValueError(f"unknown planner {cfg.planner!r}; "
                         f"valid: {', '.join(sorted(PLANNERS))}")
    config = Config().with_overrides(cfg.overrides)
    max_steps = cfg.max_steps if cfg.max_steps is not None else config.harness_max_steps
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    world = resolve_map(cfg)
    b = initial_belief(world, config)
    planner = PLANNERS[cfg.planner](config, substream(cfg.seed, "rollouts"))

    free_total = int((world.occupancy == FREE).sum())
    covered = int((b.covered & (world.occupancy == FREE)).sum())
    records: list[StepRecord] = []
    replans = 0
    recoveries = 0
    failures = 0
    ok_streak = 0
    stalls = 0
    done = False
    plan = None
    steps_since_replan = 0
    need_replan = True

    def record(mode: str) -> None:
        records.append(StepRecord(
            step=b.step, time_s=b.robot.distance_traveled / b.robot.speed,
            coverage=covered / free_total if free_total else 0.0,
            distance_m=b.robot.distance_traveled, mode=mode,
            replans=replans, recoveries=recoveries))

    record("Init")
    while b.step < max_steps:
        if need_replan or plan is None or not plan.cells \
                or steps_since_replan >= config.plgrim_k_replan:
            plan = planner.plan(b, plan)
            replans += 1
            steps_since_replan = 0
            need_replan = False
            if plan.mode == DONE:
                done = True
                break
            if not plan.cells:
                failures += 1
                stalls += 1
                if failures >= config.plgrim_f_recover:
                    planner.recover(b)
                    recoveries += 1
                    failures = 0
                if stalls > 12:
                    break  # hard stall: flush partial metrics
                continue
            stalls = 0
        b, plan, event = execute_step(world, b, plan, config)
        covered = int((b.covered & (world.occupancy == FREE)).sum())
        steps_since_replan += 1
        record(plan.mode)
        if event == OK:
            failures = 0
            ok_streak += 1
            if ok_streak >= config.plgrim_k_replan and hasattr(planner, "recovery_stage"):
                planner.recovery_stage = 0
        else:
            ok_streak = 0
            failures += 1
            need_replan = True
            if failures >= config.plgrim_f_recover:
                planner.recover(b)
                recoveries += 1
                failures = 0

    coverage = covered / free_total if free_total else 0.0
    steps_to_90 = None
    for r in records:
        if r.coverage >= 0.9:
            steps_to_90 = r.step
            break
    return Metrics(records=records, final_coverage=coverage,
                   steps_to_90=steps_to_90,
                   total_distance=b.robot.distance_traveled, done=done)


# -- environment generators -----------------------------------------------


def generate_subway(scale: int, seed: int) -> GridMap:
    """Grid of 3x3 interconnected rectangular rooms joined by 2-cell corridors."""
    if scale not in (1, 2, 3):
        raise ValueError("scale must be 1, 2, or 3")
    rng = substream(seed, "map")
    room = 12 * scale
    wall = 2
    n = 3
    size = n * room + (n + 1) * wall
    occ = np.full((size, size), OCCUPIED, dtype=np.uint8)

    def room_origin(i: int) -> int:
        return wall + i * (room + wall)

    for ry in range(n):
        for rx in range(n):
            y0, x0 = room_origin(ry), room_origin(rx)
            occ[y0:y0 + room, x0:x0 + room] = FREE
    # corridors between horizontally and vertically adjacent rooms
    for ry in range(n):
        for rx in range(n - 1):
            y0 = room_origin(ry)
            xw = room_origin(rx) + room  # wall strip start
            off = int(rng.integers(0, room - 2))
            occ[y0 + off:y0 + off + 2, xw:xw + wall] = FREE
    for ry in range(n - 1):
        for rx in range(n):
            x0 = room_origin(rx)
            yw = room_origin(ry) + room
            off = int(rng.integers(0, room - 2))
            occ[yw:yw + wall, x0 + off:x0 + off + 2] = FREE
    hazard = np.where(occ == OCCUPIED, 1.0, 0.0)
    mid = room_origin(n // 2) + room // 2
    return GridMap(width=size, height=size, cell_size=0.5, occupancy=occ,
                   hazard=hazard, start=(mid, mid))


def generate_maze(width: int, height: int, seed: int,
                  hazard_density: float = 0.0) -> GridMap:
    """Depth-first-carved maze with 20% extra wall knockouts and optional
    hazard cells drawn from {0.3, ..., 0.9}."""
    if width % 2 == 0 or height % 2 == 0:
        raise ValueError("maze dimensions must be odd")
    if width < 7 or height < 7:
        raise ValueError("maze dimensions must be >= 7")
    rng = substream(seed, "map")
    occ = np.full((height, width), OCCUPIED, dtype=np.uint8)
    cells = [(x, y) for y in range(1, height, 2) for x in range(1, width, 2)]
    for x, y in cells:
        occ[y, x] = FREE
    # iterative randomized DFS over the odd-cell lattice
    start = (1, 1)
    visited = {start}
    stack = [start]
    while stack:
        x, y = stack[-1]
        options = []
        for dx, dy in ((0, -2), (2, 0), (0, 2), (-2, 0)):
            nx, ny = x + dx, y + dy
            if 1 <= nx < width - 1 and 1 <= ny < height - 1 and (nx, ny) not in visited:
                options.append((nx, ny))
        if not options:
            stack.pop()
            continue
        nx, ny = options[int(rng.integers(len(options)))]
        occ[(y + ny) // 2, (x + nx) // 2] = FREE
        visited.add((nx, ny))
        stack.append((nx, ny))
    # knock out 20% of the remaining walls between two free cells
    knockable = []
    for y in range(1, height - 1):
        for x in range(1, width - 1):
            if occ[y, x] != OCCUPIED:
                continue
            if occ[y, x - 1] == FREE and occ[y, x + 1] == FREE:
                knockable.append((x, y))
            elif occ[y - 1, x] == FREE and occ[y + 1, x] == FREE:
                knockable.append((x, y))
    k = int(round(0.2 * len(knockable)))
    if k:
        idx = rng.choice(len(knockable), size=k, replace=False)
        for i in sorted(int(v) for v in idx):
            x, y = knockable[i]
            occ[y, x] = FREE
    hazard = np.where(occ == OCCUPIED, 1.0, 0.0)
    if hazard_density > 0:
        ys, xs = np.nonzero(occ == FREE)
        free_list = [(int(x), int(y)) for x, y in zip(xs, ys) if (x, y) != start]
        m = int(round(hazard_density * len(free_list)))
        if m:
            idx = rng.choice(len(free_list), size=m, replace=False)
            levels = rng.integers(3, 10, size=m)
            for i, lv in zip(idx, levels):
                x, y = free_list[int(i)]
                hazard[y, x] = int(lv) / 10.0
    return GridMap(width=width, height=height, cell_size=0.5, occupancy=occ,
                   hazard=hazard, start=start)


# -- comparison ------------------------------------------------------------


@dataclass
class ComparisonRow:
    time_s: float
    planner: str
    mean_coverage: float
    median_coverage: float
    n_runs: int


def _run_one(args) -> Metrics:
    return run_episode(args)


def compare(cfgs: list[EpisodeConfig], seeds: list[int], *,
            jobs: int = 1, dt: float = 1.0) -> list[ComparisonRow]:
    """Per-planner mean/median coverage-vs-time on a common time grid."""
    if not cfgs or not seeds:
        raise ValueError("need at least one config and one seed")
    sources = {c.map_source() for c in cfgs}
    if len(sources) > 1:
        raise ValueError("all compared configs must share the same map source")
    episodes = [EpisodeConfig(planner=c.planner, seed=s, map_file=c.map_file,
                              map_gen=c.map_gen, map_text=c.map_text,
                              max_steps=c.max_steps, overrides=c.overrides)
                for c in cfgs for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, episodes))
    else:
        results = [run_episode(e) for e in episodes]

    t_max = max((m.records[-1].time_s for m in results if m.records), default=0.0)
    grid = [round(i * dt, 9) for i in range(int(math.floor(t_max / dt)) + 1)]
    if not grid or grid[-1] < t_max:
        grid.append(t_max)
    rows: list[ComparisonRow] = []
    per_planner: dict[str, list[Metrics]] = {}
    order: list[str] = []
    for c, chunk in zip(cfgs, _chunks(results, len(seeds))):
        if c.planner not in per_planner:
            per_planner[c.planner] = []
            order.append(c.planner)
        per_planner[c.planner].extend(chunk)
    for t in grid:
        for name in order:
            runs = per_planner[name]
            vals = np.array([_coverage_at(m, t) for m in runs])
            rows.append(ComparisonRow(time_s=t, planner=name,
                                      mean_coverage=float(vals.mean()),
                                      median_coverage=float(np.median(vals)),
                                      n_runs=len(runs)))
    return rows


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def _coverage_at(m: Metrics, t: float) -> float:
    """Last-value-carried-forward coverage at time t."""
    cov = 0.0
    for r in m.records:
        if r.time_s <= t + 1e-9:
            cov = r.coverage
        else:
            break
    return cov


def comparison_to_csv(rows: list[ComparisonRow]) -> str:
    out = io.StringIO()
    out.write(COMPARE_HEADER + "\n")
    for r in rows:
        out.write(f"{r.time_s:.6f},{r.planner},{r.mean_coverage:.6f},"
                  f"{r.median_coverage:.6f},{r.n_runs}\n")
    return out.getvalue()


__all__ = [
    "PLANNERS", "EpisodeConfig", "StepRecord", "Metrics", "ComparisonRow",
    "run_episode", "generate_subway", "generate_maze", "generate_from_spec",
    "compare", "metrics_to_csv", "comparison_to_csv", "resolve_map",
    "initial_belief", "start_cell",
]

"""Episode loop, map generators, metrics CSV, and planner comparison."""
from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from plgrim.gridworld import FREE, OCCUPIED
from plgrim.harness import (COMPARE_HEADER, METRICS_HEADER, EpisodeConfig,
                            compare, comparison_to_csv, generate_from_spec,
                            generate_maze, generate_subway, metrics_to_csv,
                            resolve_map, run_episode)

ROOM = "####\n#S.#\n#..#\n####\n"


def connected(occ) -> bool:
    ys, xs = np.nonzero(occ == FREE)
    cells = set(zip(xs.tolist(), ys.tolist()))
    if not cells:
        return False
    start = next(iter(cells))
    seen = {start}
    q = deque([start])
    while q:
        x, y = q.popleft()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (x + dx, y + dy)
            if n in cells and n not in seen:
                seen.add(n)
                q.append(n)
    return seen == cells


class TestGenerators:
    def test_subway_scale_arithmetic(self):
        # 3 rooms of 12*scale cells plus 4 walls of 2 cells
        for scale in (1, 2, 3):
            m = generate_subway(scale, 0)
            assert m.width == m.height == 3 * 12 * scale + 8
        assert generate_subway(1, 0).width == 44

    def test_subway_invalid_scale(self):
        with pytest.raises(ValueError):
            generate_subway(4, 0)

    def test_subway_connected_and_deterministic(self):
        for seed in range(5):
            m1 = generate_subway(1, seed)
            m2 = generate_subway(1, seed)
            assert (m1.occupancy == m2.occupancy).all()
            assert connected(m1.occupancy)

    def test_subway_start_free(self):
        m = generate_subway(1, 3)
        assert m.occupancy[m.start[1], m.start[0]] == FREE

    def test_maze_connected_and_deterministic(self):
        for seed in range(5):
            m1 = generate_maze(21, 21, seed)
            m2 = generate_maze(21, 21, seed)
            assert (m1.occupancy == m2.occupancy).all()
            assert connected(m1.occupancy)

    def test_maze_boundary_walls(self):
        m = generate_maze(15, 11, 2)
        assert (m.occupancy[0, :] == OCCUPIED).all()
        assert (m.occupancy[-1, :] == OCCUPIED).all()
        assert (m.occupancy[:, 0] == OCCUPIED).all()
        assert (m.occupancy[:, -1] == OCCUPIED).all()

    def test_maze_rejects_even_or_tiny(self):
        with pytest.raises(ValueError):
            generate_maze(20, 21, 0)
        with pytest.raises(ValueError):
            generate_maze(5, 7, 0)

    def test_maze_hazard_density(self):
        m = generate_maze(41, 41, 1, hazard_density=0.1)
        free = int((m.occupancy == FREE).sum())
        hazardous = int(((m.hazard > 0) & (m.occupancy == FREE)).sum())
        assert hazardous == pytest.approx(0.1 * free, abs=2)
        levels = np.unique(m.hazard[(m.hazard > 0) & (m.occupancy == FREE)])
        assert all(0.3 <= lv <= 0.9 for lv in levels)

    def test_maze_start_never_hazardous(self):
        for seed in range(5):
            m = generate_maze(21, 21, seed, hazard_density=0.3)
            assert m.hazard[m.start[1], m.start[0]] == 0.0

    def test_spec_parsing(self):
        m = generate_from_spec("maze:21x21:d0.1", 0)
        assert m.width == 21
        assert (m.hazard[m.occupancy == FREE] > 0).any()
        assert generate_from_spec("subway:2", 0).width == 80
        for bad in ("maze", "maze:21", "triangle:3"):
            with pytest.raises(ValueError):
                generate_from_spec(bad, 0)


class TestRunEpisode:
    def cfg(self, **kw):
        defaults = dict(planner="plgrim", seed=0, map_text=ROOM,
                        overrides={"lcp.budget": 64})
        defaults.update(kw)
        return EpisodeConfig(**defaults)

    def test_tiny_room_completes(self):
        m = run_episode(self.cfg())
        assert m.final_coverage == 1.0
        assert m.done

    def test_single_free_cell_immediately_done(self):
        m = run_episode(EpisodeConfig(planner="plgrim", seed=0,
                                      map_text="###\n#S#\n###\n"))
        assert m.final_coverage == 1.0
        assert m.done
        assert m.total_distance == 0.0

    def test_unknown_planner_rejected(self):
        with pytest.raises(ValueError, match="nbv"):
            run_episode(self.cfg(planner="flood"))

    def test_invalid_max_steps(self):
        with pytest.raises(ValueError):
            run_episode(self.cfg(max_steps=0))

    def test_coverage_monotone(self):
        m = run_episode(EpisodeConfig(planner="hfe", seed=1,
                                      map_gen="maze:9x9"))
        covs = [r.coverage for r in m.records]
        assert covs == sorted(covs)
        assert covs[-1] == m.final_coverage

    def test_distance_and_time_consistent(self):
        m = run_episode(EpisodeConfig(planner="hfe", seed=1,
                                      map_gen="maze:9x9"))
        for r in m.records:
            assert r.time_s == pytest.approx(r.distance_m)  # speed 1 m/s
        dists = [r.distance_m for r in m.records]
        assert dists == sorted(dists)
        # each lattice step adds 0.5 or 0.5*sqrt(2) meters
        for a, b in zip(dists, dists[1:]):
            assert b - a == pytest.approx(0.5) or \
                b - a == pytest.approx(0.5 * np.sqrt(2))

    def test_steps_to_90(self):
        m = run_episode(EpisodeConfig(planner="hfe", seed=1,
                                      map_gen="maze:9x9"))
        first = next(r.step for r in m.records if r.coverage >= 0.9)
        assert m.steps_to_90 == first

    def test_max_steps_truncates(self):
        m = run_episode(EpisodeConfig(planner="hfe", seed=0,
                                      map_gen="maze:21x21", max_steps=10))
        assert not m.done
        assert m.records[-1].step <= 10

    def test_deterministic_metrics(self):
        cfg = EpisodeConfig(planner="plgrim", seed=3, map_gen="maze:9x9",
                            overrides={"lcp.budget": 64})
        c1 = metrics_to_csv(run_episode(cfg))
        c2 = metrics_to_csv(run_episode(cfg))
        assert c1 == c2  # byte-identical

    def test_resolve_map_precedence_and_errors(self):
        m = resolve_map(EpisodeConfig(planner="hfe", seed=0, map_text=ROOM,
                                      map_gen="maze:9x9"))
        assert m.width == 4  # text beats generator
        with pytest.raises(ValueError):
            resolve_map(EpisodeConfig(planner="hfe", seed=0))


class TestCsvFormats:
    def test_metrics_header_and_shape(self):
        m = run_episode(EpisodeConfig(planner="hfe", seed=0, map_text=ROOM))
        text = metrics_to_csv(m)
        lines = text.strip().split("\n")
        assert lines[0] == METRICS_HEADER
        assert len(lines) == len(m.records) + 1
        for line in lines[1:]:
            parts = line.split(",")
            assert len(parts) == 7
            int(parts[0]); float(parts[1]); float(parts[2]); float(parts[3])
            int(parts[5]); int(parts[6])

    def test_comparison_header_and_shape(self):
        cfgs = [EpisodeConfig(planner=p, seed=0, map_text=ROOM)
                for p in ("hfe", "nbv")]
        rows = compare(cfgs, seeds=[0, 1])
        text = comparison_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == COMPARE_HEADER
        planners = {line.split(",")[1] for line in lines[1:]}
        assert planners == {"hfe", "nbv"}
        assert all(line.split(",")[4] == "2" for line in lines[1:])


class TestCompare:
    def test_parallel_equals_sequential(self):
        cfgs = [EpisodeConfig(planner=p, seed=0, map_gen="maze:9x9",
                              overrides={"lcp.budget": 64})
                for p in ("plgrim", "hfe")]
        seq = compare(cfgs, seeds=[0, 1], jobs=1)
        par = compare(cfgs, seeds=[0, 1], jobs=2)
        assert comparison_to_csv(seq) == comparison_to_csv(par)

    def test_requires_shared_map(self):
        cfgs = [EpisodeConfig(planner="hfe", seed=0, map_gen="maze:9x9"),
                EpisodeConfig(planner="nbv", seed=0, map_gen="maze:11x11")]
        with pytest.raises(ValueError):
            compare(cfgs, seeds=[0])

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            compare([], seeds=[0])
        cfgs = [EpisodeConfig(planner="hfe", seed=0, map_text=ROOM)]
        with pytest.raises(ValueError):
            compare(cfgs, seeds=[])

    def test_coverage_carried_forward_monotone(self):
        cfgs = [EpisodeConfig(planner="hfe", seed=0, map_gen="maze:9x9")]
        rows = compare(cfgs, seeds=[0, 1, 2], dt=1.0)
        means = [r.mean_coverage for r in rows]
        assert means == sorted(means)
        assert rows[-1].mean_coverage > 0.9

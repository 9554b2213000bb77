"""Grid-world coverage planning: hierarchical roadmaps, Monte-Carlo local
search, CVaR traversability risk, and a benchmark harness with baselines."""

from .config import Config
from .gridworld import GridMap, Observation, RobotState, load_map
from .harness import EpisodeConfig, Metrics, compare, run_episode

__all__ = ["Config", "GridMap", "Observation", "RobotState", "load_map",
           "EpisodeConfig", "Metrics", "compare", "run_episode"]

__version__ = "0.1.0"

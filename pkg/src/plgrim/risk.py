"""Per-cell traversability risk: confidence-weighted estimation and CVaR.

Each cell carries a Gaussian (mean, sigma) over its traversal hazard plus an
accumulated confidence weight. Measurements are fused with a weight that
decays with distance from the robot, while previously accumulated evidence
decays with age, so recent close-range readings dominate. Planning consumes
the upper-tail expectation CVaR_alpha and a hard threshold r_max.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .gridworld import Cell, Observation, step_distance

#: Edge cost marker for edges whose endpoint CVaR exceeds the threshold.
UNTRAVERSABLE = math.inf


def cvar_samples(samples, alpha: float) -> float:
    """Empirical CVaR: mean of the worst ceil((1-alpha)*n) samples."""
    _check_alpha(alpha)
    arr = np.asarray(list(samples), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty sample list")
    # guard against float fuzz, e.g. (1-0.7)*10 = 3.0000000000000004
    k = math.ceil((1.0 - alpha) * arr.size - 1e-9)
    k = max(1, min(k, arr.size))
    tail = np.sort(arr)[arr.size - k:]
    return float(tail.mean())


def tail_factor(alpha: float) -> float:
    """phi(Phi^-1(alpha)) / (1 - alpha): Gaussian CVaR excess per unit sigma."""
    _check_alpha(alpha)
    return float(norm.pdf(norm.ppf(alpha)) / (1.0 - alpha))


def cvar_gaussian(mean: float, sigma: float, alpha: float) -> float:
    """Closed-form CVaR of N(mean, sigma^2): mean + sigma * tail_factor."""
    if sigma < 0:
        raise ValueError(f"negative sigma: {sigma}")
    return mean + sigma * tail_factor(alpha)


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0,1), got {alpha}")


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    sigma: float
    confidence: float


class RiskMap:
    """Dense per-cell risk state over a (height x width) grid."""

    def __init__(self, width: int, height: int, *, cell_size: float = 0.5,
                 alpha: float = 0.9, r_max: float = 0.6, d0: float = 4.0,
                 tau: float = 50.0, sigma_prior: float = 0.3,
                 sigma_min: float = 0.02, lambda_risk: float = 1.0):
        _check_alpha(alpha)
        if r_max < 0:
            raise ValueError("r_max must be >= 0")
        self.width = width
        self.height = height
        self.cell_size = cell_size
        self.alpha = alpha
        self.r_max = r_max
        self.d0 = d0
        self.tau = tau
        self.sigma_prior = sigma_prior
        self.sigma_min = sigma_min
        self.lambda_risk = lambda_risk
        self.mean = np.full((height, width), 0.5, dtype=np.float64)
        self.conf = np.zeros((height, width), dtype=np.float64)
        self.last_t = np.zeros((height, width), dtype=np.float64)
        self._tail = tail_factor(alpha)

    def copy(self) -> "RiskMap":
        out = RiskMap(self.width, self.height, cell_size=self.cell_size,
                      alpha=self.alpha, r_max=self.r_max, d0=self.d0,
                      tau=self.tau, sigma_prior=self.sigma_prior,
                      sigma_min=self.sigma_min, lambda_risk=self.lambda_risk)
        out.mean = self.mean.copy()
        out.conf = self.conf.copy()
        out.last_t = self.last_t.copy()
        return out

    # -- queries ----------------------------------------------------------

    def sigma_grid(self) -> np.ndarray:
        return self.sigma_min + (self.sigma_prior - self.sigma_min) * np.exp(-self.conf)

    def cvar_grid(self) -> np.ndarray:
        return self.mean + self.sigma_grid() * self._tail

    def estimate(self, cell: Cell) -> RiskEstimate:
        x, y = cell
        sigma = self.sigma_min + (self.sigma_prior - self.sigma_min) * math.exp(-self.conf[y, x])
        return RiskEstimate(mean=float(self.mean[y, x]), sigma=sigma,
                            confidence=float(self.conf[y, x]))

    def cvar(self, cell: Cell) -> float:
        e = self.estimate(cell)
        return e.mean + e.sigma * self._tail


def update_risk(rm: RiskMap, obs: Observation, robot: Cell, time: float) -> RiskMap:
    """Fuse an observation's hazard readings into the risk map (in place).

    Measurement weight w = exp(-d/d0); the evidence accumulated before this
    update is first decayed by exp(-age/tau) so old readings fade.
    """
    for (x, y), hazard in obs.hazards:
        if not (0 <= x < rm.width and 0 <= y < rm.height):
            raise IndexError(f"observation cell ({x},{y}) out of bounds")
        d = math.hypot(x - robot[0], y - robot[1]) * rm.cell_size
        w = math.exp(-d / rm.d0)
        age = max(0.0, time - rm.last_t[y, x])
        c_old = rm.conf[y, x] * math.exp(-age / rm.tau)
        c_new = c_old + w
        rm.mean[y, x] = (c_old * rm.mean[y, x] + w * hazard) / c_new
        rm.conf[y, x] = c_new
        rm.last_t[y, x] = time
    return rm


def edge_risk_cost(rm: RiskMap, a: Cell, b: Cell) -> float:
    """Risk-weighted edge cost, or UNTRAVERSABLE past the CVaR threshold.

    cost = length * (1 + lambda_risk * mean endpoint CVaR); traversable iff
    max endpoint CVaR <= r_max (closed threshold).
    """
    length = step_distance(a, b, rm.cell_size)
    ca, cb = rm.cvar(a), rm.cvar(b)
    if max(ca, cb) > rm.r_max:
        return UNTRAVERSABLE
    return length * (1.0 + rm.lambda_risk * 0.5 * (ca + cb))


def raise_risk_threshold(rm: RiskMap, factor: float) -> RiskMap:
    """Recovery behavior: widen the traversability threshold (in place)."""
    if not factor > 1.0:
        raise ValueError(f"factor must be > 1, got {factor}")
    rm.r_max *= factor
    return rm


__all__ = [
    "UNTRAVERSABLE", "RiskEstimate", "RiskMap",
    "cvar_samples", "cvar_gaussian", "tail_factor",
    "update_risk", "edge_risk_cost", "raise_risk_threshold",
]

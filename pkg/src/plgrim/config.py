"""Tunable constants for every subsystem, with a flat ``module.name`` key space.

All values can be overridden from a config file (``key = value`` lines,
``#`` comments) or from CLI ``--set`` flags.  Field names map to keys by
replacing the first underscore with a dot, e.g. ``risk_alpha`` -> ``risk.alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Config:
    # gridworld
    gridworld_cell_size: float = 0.5      # meters per cell
    gridworld_speed: float = 1.0          # meters per second
    gridworld_r_sense: float = 4.0        # sensor radius, meters

    # risk
    risk_alpha: float = 0.9               # CVaR risk level, in (0,1)
    risk_r_max: float = 0.6               # CVaR traversability threshold
    risk_d0: float = 4.0                  # distance decay scale, meters
    risk_tau: float = 50.0                # confidence age decay, steps
    risk_sigma_prior: float = 0.3
    risk_sigma_min: float = 0.02
    risk_lambda_risk: float = 1.0         # edge cost risk weight

    # irm
    irm_d_bc: float = 2.0                 # breadcrumb spacing, meters
    irm_r_connect: float = 6.0            # breadcrumb shortcut radius, meters
    irm_min_frontier_size: int = 2        # cells
    irm_local_radius: int = 16            # local window half-width, cells

    # gcp
    gcp_gamma: float = 0.95               # discount per meter
    gcp_lambda_cost: float = 0.05         # movement cost per meter
    gcp_eps_vi: float = 1e-6              # value-iteration tolerance
    gcp_mu_frontier: float = 1.0          # frontier reward per member cell

    # lcp
    lcp_macro_len: int = 4                # lattice steps per macro action
    lcp_depth: int = 3                    # macro actions per simulation
    lcp_gamma: float = 0.9                # discount per macro action
    lcp_ucb_c: float = 1.4
    lcp_lambda_info: float = 1.0
    lcp_lambda_cost: float = 0.5
    lcp_lambda_goal: float = 0.3
    lcp_p_occ: float = 0.2                # sampled Occupied probability for unknowns
    lcp_budget: int = 2048                # simulations per planning call

    # plgrim orchestration
    plgrim_k_replan: int = 4              # steps between scheduled replans
    plgrim_eps_tie: float = 0.05          # relative plan-value tie band
    plgrim_f_recover: int = 3             # consecutive failures before recovery
    plgrim_t_blacklist: int = 200         # frontier blacklist duration, steps
    plgrim_recover_factor: float = 1.5    # risk threshold raise per recovery stage

    # baselines
    nbv_n_samples: int = 32

    # harness
    harness_max_steps: int = 10000

    def key(self, field_name: str) -> str:
        return field_name.replace("_", ".", 1)

    def items(self) -> list[tuple[str, float | int]]:
        """(key, value) pairs in declaration order."""
        return [(self.key(f.name), getattr(self, f.name)) for f in fields(self)]

    def with_overrides(self, overrides: dict[str, float | int | str]) -> "Config":
        """Return a copy with ``module.name`` keyed overrides applied."""
        by_key = {self.key(f.name): f for f in fields(self)}
        changes = {}
        for key, value in overrides.items():
            f = by_key.get(key)
            if f is None:
                raise KeyError(f"unknown config key: {key!r}")
            changes[f.name] = f.type_cast(value) if hasattr(f, "type_cast") else _cast(f.name, value)
        return replace(self, **changes)


def _cast(field_name: str, value):
    target = Config.__dataclass_fields__[field_name].type
    if target in ("int", int):
        return int(round(float(value)))
    return float(value)


def parse_config_text(text: str) -> dict[str, float]:
    """Parse flat ``key = value`` config text; '#' starts a comment."""
    out: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = float(value.strip())
    return out


def format_defaults(cfg: Config | None = None) -> str:
    """Render every tunable as config-file text, grouped by module of origin."""
    cfg = cfg or Config()
    lines = []
    current = None
    for key, value in cfg.items():
        module = key.split(".", 1)[0]
        if module != current:
            if current is not None:
                lines.append("")
            lines.append(f"# {module}")
            current = module
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"

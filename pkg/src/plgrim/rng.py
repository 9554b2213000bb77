"""Named, counter-derived RNG substreams from a single episode seed.

Each consumer (map generation, particle sampling, rollouts, view sampling)
gets its own stream so a change in one module's draw count never perturbs
another module's sequence.
"""
from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, name: str, counter: int = 0) -> np.random.Generator:
    """Deterministic generator for (seed, name, counter)."""
    digest = hashlib.sha256(f"{name}:{counter}".encode()).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, key]))

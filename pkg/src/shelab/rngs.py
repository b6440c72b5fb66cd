"""Reproducible random streams.

Streams are keyed by logical task identity, never by worker identity, so
results are independent of the worker count used to execute a run.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the logical task identified by `key` under a root seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def spawn(seed: int, n: int) -> list[np.random.Generator]:
    """n independent generators derived from one root seed."""
    return [stream(seed, i) for i in range(n)]

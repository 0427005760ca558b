"""
Counter-based random streams for reproducible, schedule-independent
replications.

Every stream is a Philox generator keyed by the master seed plus an index
tuple. Replication streams use ``(0, scenario, n, p, rep)``, design streams
``(1, scenario, n, d)`` and coefficient streams ``(2, scenario, n, p, rep)``,
so no two purposes share a key and no stream depends on execution order.
"""

from __future__ import annotations

import numpy as np

SCENARIO_CODES = {"nested": 1, "all_subset": 2, "pcr": 3}

_REPLICATION, _DESIGN, _COEFFICIENT = 0, 1, 2


def _generator(master_seed: int, key: tuple) -> np.random.Generator:
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def replication_rng(master_seed: int, scenario: str, n: int, p: int, rep: int) -> np.random.Generator:
    """Noise stream for one replication."""
    return _generator(master_seed, (_REPLICATION, SCENARIO_CODES[scenario], n, p, rep))


def coefficient_rng(master_seed: int, scenario: str, n: int, p: int, rep: int) -> np.random.Generator:
    """Coefficient stream (permutations, random cubes) for one replication."""
    return _generator(master_seed, (_COEFFICIENT, SCENARIO_CODES[scenario], n, p, rep))


def design_rng(master_seed: int, scenario: str, n: int, d: int) -> np.random.Generator:
    """Stream for a design matrix shared by all replications at one ``(n, d)``."""
    return _generator(master_seed, (_DESIGN, SCENARIO_CODES[scenario], n, d))

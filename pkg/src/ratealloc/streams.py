"""Per-replication random streams split off a master seed.

Replication ``r`` always draws from ``SeedSequence(master_seed, spawn_key=(r,))``,
so a replication's numbers do not depend on how many others ran, in what
order, or on which thread.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def replication_rng(master_seed: int, replication: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(replication,))
    return np.random.Generator(np.random.PCG64(seq))


def draw_block(rng: np.random.Generator, horizon: int) -> np.ndarray:
    """Standard normals for one replication: row 0 disturbances, row 1 compression."""
    return rng.standard_normal((2, horizon))


def standard_draws(
    master_seed: int, replications: int, horizon: int, threads: int = 1
) -> np.ndarray:
    """Stack of per-replication blocks, shape (replications, 2, horizon)."""
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    out = np.empty((replications, 2, horizon))

    def fill(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            out[r] = draw_block(replication_rng(master_seed, r), horizon)

    threads = max(1, int(threads))
    if threads == 1:
        fill(0, replications)
    else:
        edges = np.linspace(0, replications, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, edges[:-1], edges[1:]))
    return out

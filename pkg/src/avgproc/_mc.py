"""Reproducible Monte Carlo replica driver.

Replica r of a run with master seed s draws from an independent PCG64
stream keyed by SeedSequence([s, r]), a counter-based hash split of the
master seed (hash64(master_seed, r) in effect).  Replicas may execute on
any number of worker threads; results land in a replica-indexed array and
are reduced in index order with compensated summation, so the output is
bit-identical regardless of scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    """Independent stream for one replica of one run."""
    if master_seed < 0 or replica < 0:
        raise ValueError("seeds and replica indices are unsigned")
    return np.random.default_rng(np.random.SeedSequence([master_seed, replica]))


def run_replicas(
    fn: Callable[[int, np.random.Generator], tuple[float, ...]],
    replicas: int,
    master_seed: int,
    n_outputs: int = 1,
    threads: int = 1,
) -> np.ndarray:
    """Evaluate fn(r, rng_r) for r = 0..replicas-1; (replicas, n_outputs) array.

    fn must not mutate shared state; it owns its generator.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    out = np.empty((replicas, n_outputs))

    def one(r: int) -> None:
        res = fn(r, replica_rng(master_seed, r))
        out[r, :] = res

    if threads <= 1:
        for r in range(replicas):
            one(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(replicas)))
    return out


def mean_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error, reduced in index order with fsum."""
    r = len(values)
    if r < 2:
        raise ValueError("need at least 2 replicas for a standard error")
    mean = math.fsum(values) / r
    var = math.fsum((v - mean) ** 2 for v in values) / (r - 1)
    return mean, math.sqrt(var / r)

"""Forward simulators, theory-based summaries and exact oracles."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..core import SPLITS, Dataset, PriorSpec, concat_datasets, generators
from .ising import IsingModel
from .ma2 import Ma2Model, Ma2PosteriorGrid, NotPositiveDefiniteError

__all__ = [
    "IsingModel",
    "Ma2Model",
    "Ma2PosteriorGrid",
    "NotPositiveDefiniteError",
    "default_threads",
    "model_from_dict",
    "simulate_dataset",
    "simulate_pairs",
]

BATCH = 512


def default_threads() -> int:
    return max(1, int(os.environ.get("DEEPABC_THREADS", "1")))


def model_from_dict(d: dict):
    kind = d.get("model")
    if kind == "ising":
        return IsingModel(m=int(d.get("m", 10)), burn_in=int(d.get("burn_in", 1000)),
                          sweeps=int(d.get("sweeps", 1)))
    if kind == "ma2":
        return Ma2Model(p=int(d.get("p", 100)))
    raise ValueError(f"unknown model {kind!r}")


def _simulate_chunk(model, prior, seed, ids):
    gens = generators(seed, ids)
    thetas = np.array([prior.sample(g) for g in gens])
    return thetas, model.simulate_batch(thetas, gens)


def simulate_pairs(model, prior: PriorSpec, seed: int, stream_ids, threads: int | None = None):
    """Draw (theta, x) for each stream id: theta from the prior, then x given theta.

    Pair ``i`` depends only on ``(seed, stream_ids[i])``, so the output is
    identical for any thread count.
    """
    stream_ids = np.asarray(stream_ids, dtype=np.uint64)
    chunks = [stream_ids[i:i + BATCH] for i in range(0, len(stream_ids), BATCH)]
    threads = default_threads() if threads is None else threads
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda ids: _simulate_chunk(model, prior, seed, ids), chunks))
    else:
        parts = [_simulate_chunk(model, prior, seed, ids) for ids in chunks]
    if not parts:
        return np.empty((0, prior.dim)), np.empty((0, model.data_dim))
    return np.concatenate([t for t, _ in parts]), np.concatenate([x for _, x in parts])


def simulate_dataset(model, prior: PriorSpec, sizes, seed: int,
                     threads: int | None = None) -> Dataset:
    """Simulate train/validation/test pairs using consecutive stream ids."""
    parts = []
    start = 0
    for code, n in enumerate(sizes):
        if n == 0:
            continue
        theta, x = simulate_pairs(model, prior, seed, np.arange(start, start + n), threads)
        parts.append(Dataset(theta, x, np.full(n, code), seed, model.tag,
                             {"model": model.to_dict(), "prior": prior.to_dict(),
                              "stream_offset": start}))
        start += n
    if not parts:
        raise ValueError("dataset sizes must not all be zero")
    ds = concat_datasets(parts)
    ds.meta["split_sizes"] = dict(zip(SPLITS, map(int, sizes)))
    return ds

"""Yaw-balanced minibatch sampling."""
from __future__ import annotations

import math
from typing import Iterator, Sequence

import numpy as np


def yaw_balanced_batches(samples: Sequence, batch_size: int, bins: int = 8, seed: int = 0,
                         n_batches: int | None = None) -> Iterator[list[int]]:
    """Yield lists of sample indices drawn evenly across yaw bins.

    ``samples`` may hold ``Sample`` objects or plain integer bin ids. Draws
    cycle through the non-empty bins in a freshly shuffled order each round,
    taking the next sample of a per-bin shuffled queue; small bins are
    therefore oversampled. With one bin this is ordinary shuffled batching,
    and when ``batch_size`` is smaller than the number of bins the cycle
    simply continues into the next batch (round-robin).

    ``n_batches`` defaults to one epoch, ``ceil(len(samples) / batch_size)``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    keys = [s if isinstance(s, (int, np.integer)) else s.yaw_bin for s in samples]
    if not keys:
        return
    groups: dict[int, list[int]] = {}
    for i, k in enumerate(keys):
        groups.setdefault(int(k) if 0 <= int(k) < bins else -1, []).append(i)
    order = sorted(groups)
    rng = np.random.default_rng(seed)

    queues = {b: [] for b in order}
    cycle: list[int] = []

    def next_from(b: int) -> int:
        if not queues[b]:
            queues[b] = list(rng.permutation(groups[b]))
        return int(queues[b].pop(0))

    total = n_batches if n_batches is not None else math.ceil(len(keys) / batch_size)
    for _ in range(total):
        batch = []
        for _ in range(batch_size):
            if not cycle:
                cycle = [order[j] for j in rng.permutation(len(order))]
            batch.append(next_from(cycle.pop(0)))
        yield batch

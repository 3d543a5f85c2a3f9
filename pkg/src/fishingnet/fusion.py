"""Late fusion of per-modality grid sequences.

Inputs are grid sequences or raw (rows, cols, 3, T) probability arrays in
modality order; ties that survive every rule go to the earlier modality.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fishingnet.config import ConfigError, ConfigMixin
from fishingnet.grid import GridSequence


@dataclass
class PriorityMap(ConfigMixin):
    vru: int = 3
    vehicle: int = 2
    background: int = 1

    def validate(self) -> None:
        vals = self.as_array().tolist()
        if min(vals) <= 0 or len(set(vals)) != len(vals):
            raise ConfigError(f"priorities must be distinct positive integers, got {vals}")

    def as_array(self) -> np.ndarray:
        return np.array([self.vru, self.vehicle, self.background], dtype=np.int64)


def _stack(seqs: Sequence) -> tuple[np.ndarray, GridSequence | None]:
    if len(seqs) == 0:
        raise ValueError("need at least one sequence to fuse")
    first = seqs[0] if isinstance(seqs[0], GridSequence) else None
    arrays = []
    for s in seqs:
        if isinstance(s, GridSequence):
            if first is not None and (s.spec != first.spec or s.timesteps != first.timesteps):
                raise ValueError("cannot fuse sequences with different grid specs or timesteps")
            arrays.append(s.probs)
        else:
            arrays.append(np.asarray(s))
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ValueError(f"cannot fuse arrays of shapes {[a.shape for a in arrays]}")
    return np.stack(arrays), first


def _wrap(out: np.ndarray, like: GridSequence | None):
    return GridSequence(like.spec, out, like.timesteps) if like is not None else out


def fuse_average(seqs: Sequence, class_axis: int = 2):
    """Per-cell, per-class, per-horizon arithmetic mean of the softmax values."""
    stacked, like = _stack(seqs)
    return _wrap(stacked.mean(axis=0), like)


def fuse_priority(seqs: Sequence, pm: PriorityMap | None = None, class_axis: int = 2):
    """Priority pool.

    Each modality votes its argmax class. The cell takes the full vector of
    the modality whose vote has the highest priority; among modalities that
    voted that class, the largest softmax value for it wins, then the lowest
    modality index.
    """
    pm = pm or PriorityMap()
    pm.validate()
    stacked, like = _stack(seqs)
    axis = class_axis + 1
    votes = np.argmax(stacked, axis=axis)                        # (M, ...)
    prio = pm.as_array()[votes]
    best = prio.max(axis=0, keepdims=True)
    magnitude = np.take_along_axis(stacked, np.expand_dims(votes, axis), axis=axis).squeeze(axis)
    score = np.where(prio == best, magnitude, -np.inf)
    winner = np.argmax(score, axis=0)                            # first max = lowest index
    # copy the winning modality's whole class vector
    idx = np.expand_dims(np.expand_dims(winner, class_axis), 0)
    out = np.take_along_axis(stacked, idx, axis=0)[0]
    return _wrap(out, like)

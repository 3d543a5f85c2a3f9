"""Class-weighted cross entropy summed over horizons and cells."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fishingnet import tensor as F
from fishingnet.config import ConfigError, ConfigMixin
from fishingnet.tensor import Tensor

LOG_EPS = 1e-12


@dataclass
class LossWeights(ConfigMixin):
    k_vru: float = 10.0
    k_vehicle: float = 1.0
    k_background: float = 1.0

    def validate(self) -> None:
        if min(self.k_vru, self.k_vehicle, self.k_background) <= 0:
            raise ConfigError("class loss weights must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.k_vru, self.k_vehicle, self.k_background])


def _check_labels(labels: np.ndarray, class_axis: int) -> None:
    s = labels.sum(axis=class_axis)
    if not np.allclose(s, 1.0, atol=1e-5) or labels.min() < 0:
        raise ValueError("labels must be normalized class distributions")


def _weight_grid(labels: np.ndarray, weights: LossWeights, class_axis: int) -> np.ndarray:
    shape = [1] * labels.ndim
    shape[class_axis] = -1
    return labels * weights.as_array().reshape(shape)


def loss(pred: Tensor, labels: np.ndarray, weights: LossWeights | None = None) -> tuple[Tensor, Tensor]:
    """Weighted cross entropy on (N, T, 3, H, W) probabilities.

    Returns ``(mean, total)``: ``total`` is
    ``-sum_n sum_t sum_cells sum_c k_c p log(q + 1e-12)`` and ``mean`` is
    ``total`` divided by the number of (sample, horizon, cell) triples.
    Optimisation uses ``mean`` so the step size does not depend on grid size.
    """
    weights = weights or LossWeights()
    labels = np.asarray(labels)
    if labels.shape != pred.shape:
        raise ValueError(f"label shape {labels.shape} != prediction shape {pred.shape}")
    _check_labels(labels, 2)
    coeff = -_weight_grid(labels, weights, 2)
    total = F.sum(F.mul_const(F.log(pred, LOG_EPS), coeff))
    n_terms = pred.data.size // pred.shape[2]
    return F.scale(total, 1.0 / n_terms), total


def per_class_loss(pred: np.ndarray, labels: np.ndarray, weights: LossWeights | None = None,
                   class_axis: int = 2) -> np.ndarray:
    """Mean per-cell loss contribution of each true class (numpy, no tape)."""
    weights = weights or LossWeights()
    terms = -_weight_grid(labels, weights, class_axis) * np.log(pred + LOG_EPS)
    n_terms = pred.size // pred.shape[class_axis]
    axes = tuple(i for i in range(pred.ndim) if i != class_axis)
    return terms.sum(axis=axes) / n_terms


def sequence_loss(pred, label, weights: LossWeights | None = None) -> tuple[float, float]:
    """Loss between two grid sequences (rows, cols, 3, T); returns (sum, per-cell mean)."""
    p = pred.probs if hasattr(pred, "probs") else np.asarray(pred)
    q_true = label.probs if hasattr(label, "probs") else np.asarray(label)
    if p.shape != q_true.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q_true.shape}")
    _check_labels(q_true, 2)
    weights = weights or LossWeights()
    total = float(-(_weight_grid(q_true, weights, 2) * np.log(p + LOG_EPS)).sum())
    return total, total / (p.size // p.shape[2])

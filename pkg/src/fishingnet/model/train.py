"""Per-modality training, inference, and checkpoints."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from fishingnet import tensor as F
from fishingnet.config import ConfigError, ConfigMixin
from fishingnet.featurize import LIDAR_CHANNELS, RADAR_CHANNELS, RadarNorm, featurize_sample
from fishingnet.grid import CLASS_NAMES, GridSpec, one_hot
from fishingnet.model.adam import AdamState, adam_step
from fishingnet.model.gridnet import GridNet, GridNetConfig, features_to_nchw
from fishingnet.model.layers import Module
from fishingnet.model.loss import LossWeights, loss, per_class_loss
from fishingnet.model.visionnet import VisionNet, VisionNetConfig
from fishingnet.sim.batching import yaw_balanced_batches
from fishingnet.tensor import Tape, Tensor

log = logging.getLogger(__name__)

MODALITIES = ("lidar", "radar", "vision")
CHECKPOINT_FORMAT = "fishingnet-checkpoint"


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


class CheckpointMismatchError(ValueError):
    """Checkpoint was trained for a different grid or network config."""


@dataclass
class TrainConfig(ConfigMixin):
    epochs: int = 1
    max_steps: int | None = None
    batch_size: int = 8
    lr: float = 1e-3
    seed: int = 0
    yaw_bins: int = 8
    weights: LossWeights = field(default_factory=LossWeights)

    def validate(self) -> None:
        if self.batch_size < 1 or self.epochs < 0 or self.lr <= 0:
            raise ConfigError("invalid training hyperparameters")
        if isinstance(self.weights, dict):
            self.weights = LossWeights.from_dict(self.weights)
        self.weights.validate()

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["weights"] = self.weights.to_dict()
        return d


def build_network(modality: str, spec: GridSpec, net_config: GridNetConfig | VisionNetConfig | dict | None = None,
                  seed: int = 0, dtype=np.float32, image_shape: tuple[int, int] | None = None,
                  frames: int = 5) -> Module:
    if modality in ("lidar", "radar"):
        if not isinstance(net_config, GridNetConfig):
            d = dict(net_config or {})
            d.setdefault("in_channels", (LIDAR_CHANNELS if modality == "lidar" else RADAR_CHANNELS) * frames)
            net_config = GridNetConfig.from_dict(d)
        return GridNet(net_config, spec.shape, seed, dtype)
    if modality == "vision":
        if not isinstance(net_config, VisionNetConfig):
            net_config = VisionNetConfig.from_dict(net_config or {})
        return VisionNet(net_config, spec.shape, image_shape, seed, dtype)
    raise ConfigError(f"unknown modality {modality!r}")


def net_config_dict(net: Module) -> dict:
    return net.config.to_dict()


def prepare_inputs(samples: Sequence, modality: str, norm: RadarNorm | None = None) -> np.ndarray:
    """Stacked network inputs: NCHW for lidar/radar, (N, cams, T, H, W, 3) for vision."""
    feats = np.stack([featurize_sample(s, modality, norm=norm) for s in samples])
    if modality in ("lidar", "radar"):
        return features_to_nchw(feats)
    return feats


def prepare_labels(samples: Sequence) -> np.ndarray:
    """One-hot labels in network layout, (N, T, 3, rows, cols) float32."""
    lab = np.stack([s.labels for s in samples]).astype(np.int64)  # N T H W
    return np.ascontiguousarray(np.moveaxis(one_hot(lab), -1, 2))


def predict(net: Module, inputs: np.ndarray, batch_size: int = 16) -> np.ndarray:
    """Eval-mode probabilities (N, T, 3, rows, cols)."""
    was_training = net.training
    net.eval()
    out = []
    try:
        for i in range(0, len(inputs), batch_size):
            out.append(net(Tensor(inputs[i: i + batch_size], dtype=net.dtype)).data)
    finally:
        net.train(was_training)
    return np.concatenate(out) if out else np.zeros((0,))


@dataclass
class TrainResult:
    net: Module
    history: list[dict]
    state: AdamState


def train(modality: str, samples: Sequence, spec: GridSpec | None = None,
          net_config: GridNetConfig | VisionNetConfig | dict | None = None,
          config: TrainConfig | None = None, checkpoint_path: str | Path | None = None,
          log_path: str | Path | None = None, inputs: np.ndarray | None = None,
          labels: np.ndarray | None = None) -> TrainResult:
    """Train one modality's network with Adam on yaw-balanced minibatches.

    Deterministic for a fixed ``config.seed``. ``inputs``/``labels`` may be
    passed precomputed (see :func:`prepare_inputs`) to skip featurization.
    """
    config = config or TrainConfig()
    config.validate()
    if not samples:
        raise ValueError("cannot train on an empty dataset")
    spec = spec or samples[0].spec
    if inputs is None:
        inputs = prepare_inputs(samples, modality)
    if labels is None:
        labels = prepare_labels(samples)
    image_shape = inputs.shape[3:5] if modality == "vision" else None
    net = build_network(modality, spec, net_config, seed=config.seed, image_shape=image_shape)
    net.train()
    state = AdamState(lr=config.lr)
    params = net.parameters()
    steps_per_epoch = math.ceil(len(samples) / config.batch_size)
    total = config.max_steps if config.max_steps is not None else config.epochs * steps_per_epoch
    history = []
    log_file = open(log_path, "w") if log_path else None
    try:
        batches = yaw_balanced_batches(samples, config.batch_size, config.yaw_bins, config.seed, n_batches=total)
        for step, idx in enumerate(batches):
            x = Tensor(inputs[idx], dtype=net.dtype)
            y = labels[idx]
            with Tape() as tape:
                pred = net(x)
                mean_loss, total_loss = loss(pred, y, config.weights)
            value = mean_loss.item()
            if not math.isfinite(value):
                raise DivergenceError(f"{modality}: loss became {value} at step {step} "
                                      f"(lr={config.lr}, batch={idx[:4]}...)")
            net.zero_grad()
            tape.backward(mean_loss)
            adam_step(state, params)
            per_class = per_class_loss(pred.data, y, config.weights)
            rec = {"step": step, "loss": value, "loss_sum": total_loss.item()}
            rec.update({f"loss_{name}": float(v) for name, v in zip(CLASS_NAMES, per_class)})
            history.append(rec)
            if log_file:
                log_file.write(json.dumps(rec) + "\n")
            if step % 50 == 0:
                log.debug("%s step %d loss %.5f", modality, step, value)
    finally:
        if log_file:
            log_file.close()
    if checkpoint_path:
        save_model(checkpoint_path, net, modality, spec, extra={"train": config.to_dict(), "steps": total})
    return TrainResult(net, history, state)


def save_model(path: str | Path, net: Module, modality: str, spec: GridSpec, extra: dict | None = None) -> Path:
    meta = {"format": CHECKPOINT_FORMAT, "modality": modality, "grid": spec.to_dict(),
            "net": net.config.to_dict(), "dtype": np.dtype(net.dtype).name}
    if isinstance(net, VisionNet):
        meta["image_shape"] = list(net.image_shape)
    if extra:
        meta.update(extra)
    return F.save_checkpoint(path, net.state_dict(), meta)


def load_model(path: str | Path, spec: GridSpec | None = None) -> tuple[Module, dict]:
    """Rebuild a network from a checkpoint; ``spec`` (if given) must match its grid."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    arrays, meta = F.load_checkpoint(path)
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointMismatchError(f"{path} is not a fishingnet checkpoint")
    ck_spec = GridSpec.from_dict(meta["grid"])
    if spec is not None and ck_spec != spec:
        raise CheckpointMismatchError(f"checkpoint grid {ck_spec} does not match configured grid {spec}")
    image_shape = tuple(meta["image_shape"]) if "image_shape" in meta else None
    net = build_network(meta["modality"], ck_spec, meta["net"], dtype=np.dtype(meta.get("dtype", "float32")).type,
                        image_shape=image_shape)
    try:
        net.load_state_dict(arrays)
    except (KeyError, ValueError) as exc:
        raise CheckpointMismatchError(f"checkpoint parameters do not fit the network: {exc}") from exc
    net.eval()
    return net, meta

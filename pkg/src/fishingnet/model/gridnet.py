"""U-Net-like encoder-decoder shared by the lidar and radar networks.

Encoder: 5 blocks of [conv-BN-ReLU] x 2, each but the last followed by 2x2
average pooling (the last one too when ``pool_last``). Decoder: 5 blocks of
[conv-BN-ReLU] x 3 with nearest upsampling before blocks 2-5 (and before
block 1 when ``pool_last``), which brings the map back to input resolution.
The output of encoder block 4 (before its pooling) is concatenated onto the
input of decoder block 2; both sit at 1/8 resolution. A biased 1x1 conv
produces 3 classes x 5 horizons of logits, softmaxed over the class axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fishingnet import tensor as F
from fishingnet.config import ConfigError, ConfigMixin
from fishingnet.grid import NUM_CLASSES
from fishingnet.model.layers import Conv2d, ConvBNReLU, Module
from fishingnet.tensor import Tensor

N_BLOCKS = 5
SKIP_ENCODER_BLOCK = 3   # 0-based: fourth encoder block
SKIP_DECODER_BLOCK = 1   # 0-based: second decoder block
WIDTH_MULTIPLIERS = (1, 2, 4, 4, 4)


@dataclass
class GridNetConfig(ConfigMixin):
    in_channels: int = 40
    base_width: int = 8
    horizons: int = 5
    # encoder poolings, after blocks 1..pools; None means 5 when the grid
    # divides by 32, else 4. Decoder upsampling mirrors them from the end.
    pools: int | None = None

    def validate(self) -> None:
        if self.in_channels < 1 or self.base_width < 1 or self.horizons < 1:
            raise ConfigError("GridNetConfig values must be positive")
        if self.pools is not None and not 0 <= self.pools <= N_BLOCKS:
            raise ConfigError(f"pools must lie in 0..{N_BLOCKS}")

    def resolve_pools(self, rows: int, cols: int) -> int:
        if self.pools is None:
            return N_BLOCKS if rows % 32 == 0 and cols % 32 == 0 else N_BLOCKS - 1
        return int(self.pools)


class GridNet(Module):
    def __init__(self, config: GridNetConfig, grid_shape: tuple[int, int], seed: int = 0, dtype=np.float32):
        config.validate()
        rows, cols = grid_shape
        self.config = config
        self.pools = config.resolve_pools(rows, cols)
        factor = 2 ** self.pools
        if rows % factor or cols % factor:
            raise ConfigError(f"grid {grid_shape} must be divisible by {factor} for this network")
        self.grid_shape = (rows, cols)
        rng = np.random.default_rng(seed)
        widths = [config.base_width * m for m in WIDTH_MULTIPLIERS]

        self.encoder = []
        cin = config.in_channels
        for w in widths:
            self.encoder.append([ConvBNReLU(cin, w, rng, dtype), ConvBNReLU(w, w, rng, dtype)])
            cin = w
        self.decoder = []
        dec_widths = widths[::-1]
        for j, w in enumerate(dec_widths):
            if j == SKIP_DECODER_BLOCK:
                cin += widths[SKIP_ENCODER_BLOCK]
            self.decoder.append([ConvBNReLU(cin, w, rng, dtype), ConvBNReLU(w, w, rng, dtype),
                                 ConvBNReLU(w, w, rng, dtype)])
            cin = w
        self.head = Conv2d(cin, NUM_CLASSES * config.horizons, 1, rng, bias=True, dtype=dtype)
        self.dtype = dtype

    def __call__(self, x: Tensor, ablate_skip: bool = False) -> Tensor:
        """``x`` is (N, C, rows, cols); returns probabilities (N, T, 3, rows, cols)."""
        if x.shape[2:] != self.grid_shape:
            raise ValueError(f"input spatial dims {x.shape[2:]} do not match network grid {self.grid_shape}")
        if x.shape[1] != self.config.in_channels:
            raise ValueError(f"input has {x.shape[1]} channels, network expects {self.config.in_channels}")
        skip = None
        h = x
        for i, block in enumerate(self.encoder):
            for layer in block:
                h = layer(h)
            if i == SKIP_ENCODER_BLOCK:
                skip = h
            if i < self.pools:
                h = F.avg_pool2d(h)
        for j, block in enumerate(self.decoder):
            if j >= N_BLOCKS - self.pools:
                h = F.upsample2d(h)
            if j == SKIP_DECODER_BLOCK:
                if ablate_skip:
                    skip = Tensor(np.zeros_like(skip.data))
                h = F.concat([h, skip], axis=1)
            for layer in block:
                h = layer(h)
        return class_softmax(self.head(h), self.config.horizons)


def class_softmax(logits: Tensor, horizons: int) -> Tensor:
    """(N, T*3, H, W) logits to (N, T, 3, H, W) per-horizon class probabilities."""
    n, _, h, w = logits.shape
    return F.softmax(F.reshape(logits, (n, horizons, NUM_CLASSES, h, w)), axis=2)


def features_to_nchw(features: np.ndarray) -> np.ndarray:
    """(rows, cols, C) or (N, rows, cols, C) feature grids to NCHW."""
    features = np.asarray(features)
    if features.ndim == 3:
        features = features[None]
    return np.ascontiguousarray(features.transpose(0, 3, 1, 2))


def probs_to_sequences(probs: np.ndarray) -> np.ndarray:
    """(N, T, 3, H, W) network output to (N, H, W, 3, T) grid-sequence layout."""
    return np.ascontiguousarray(np.asarray(probs).transpose(0, 3, 4, 2, 1))


def sequences_to_probs(seqs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`probs_to_sequences`."""
    return np.ascontiguousarray(np.asarray(seqs).transpose(0, 4, 3, 1, 2))

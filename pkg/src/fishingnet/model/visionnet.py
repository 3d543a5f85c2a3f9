"""Camera network: shared residual encoder, learned orthographic transform,
residual decoder.

Each camera's frames are stacked along channels (T * 3) and pushed through
the same encoder. The orthographic transform maps every channel's flattened
encoder map through a per-camera stack of unbiased dense layers (ReLU
between layers, none after the last) to a flattened top-down map; the
per-camera results are summed and decoded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fishingnet import tensor as F
from fishingnet.config import ConfigError, ConfigMixin
from fishingnet.grid import NUM_CLASSES
from fishingnet.model.gridnet import class_softmax
from fishingnet.model.layers import Conv2d, Module, ResBlock
from fishingnet.tensor import Tensor


@dataclass
class OrthoConfig(ConfigMixin):
    layers: int = 2
    # hidden width of intermediate layers; None means the output size
    hidden: int | None = None
    max_weights: int = 4_000_000
    init: str = "he"  # he | identity

    def validate(self) -> None:
        if self.layers < 1:
            raise ConfigError("ortho stack needs at least one layer")
        if self.init not in ("he", "identity"):
            raise ConfigError(f"unknown ortho init {self.init!r}")


@dataclass
class VisionNetConfig(ConfigMixin):
    cameras: int = 4
    frames: int = 5
    base_width: int = 8
    blocks: int = 4
    horizons: int = 5
    ortho: OrthoConfig = field(default_factory=OrthoConfig)

    def validate(self) -> None:
        if min(self.cameras, self.frames, self.base_width, self.blocks, self.horizons) < 1:
            raise ConfigError("VisionNetConfig values must be positive")
        if isinstance(self.ortho, dict):
            self.ortho = OrthoConfig.from_dict(self.ortho)
        self.ortho.validate()

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["ortho"] = self.ortho.to_dict()
        return d

    def widths(self) -> list[int]:
        return [self.base_width * min(2 ** i, 4) for i in range(self.blocks)]


class OrthoTransform(Module):
    def __init__(self, cameras: int, in_hw: tuple[int, int], out_hw: tuple[int, int], config: OrthoConfig,
                 rng: np.random.Generator, dtype=np.float32):
        config.validate()
        n_in, n_out = in_hw[0] * in_hw[1], out_hw[0] * out_hw[1]
        hidden = config.hidden or n_out
        dims = [n_in] + [hidden] * (config.layers - 1) + [n_out]
        total = cameras * sum(a * b for a, b in zip(dims[:-1], dims[1:]))
        if total > config.max_weights:
            raise ConfigError(f"orthographic transform needs {total} weights, budget is {config.max_weights}")
        self.in_hw, self.out_hw = tuple(in_hw), tuple(out_hw)
        self.weights = []
        for _ in range(cameras):
            stack = []
            for a, b in zip(dims[:-1], dims[1:]):
                if config.init == "identity":
                    stack.append(Tensor(np.eye(a, b), requires_grad=True, dtype=dtype))
                else:
                    stack.append(F.he_uniform((a, b), a, rng, dtype))
            self.weights.append(stack)

    def __call__(self, maps: Tensor) -> Tensor:
        """``maps`` is (N, cams, C, h, w); returns the camera sum (N, C, h', w')."""
        n, cams, c, h, w = maps.shape
        if cams != len(self.weights) or (h, w) != self.in_hw:
            raise ValueError(f"ortho input {maps.shape} does not match {len(self.weights)} cameras of {self.in_hw}")
        flat = F.reshape(maps, (n, cams, c, h * w))
        total = None
        for i, stack in enumerate(self.weights):
            y = F.take(flat, i, axis=1)
            for li, wt in enumerate(stack):
                if li > 0:
                    y = F.relu(y)
                y = F.dense_unbiased(y, wt)
            total = y if total is None else F.add(total, y)
        return F.reshape(total, (n, c, *self.out_hw))


def ortho_transform(encoder_maps: Tensor, transform: OrthoTransform) -> Tensor:
    return transform(encoder_maps)


class VisionNet(Module):
    def __init__(self, config: VisionNetConfig, grid_shape: tuple[int, int], image_shape: tuple[int, int] | None = None,
                 seed: int = 0, dtype=np.float32):
        config.validate()
        self.config = config
        self.grid_shape = tuple(grid_shape)
        self.image_shape = tuple(image_shape or grid_shape)
        factor = 2 ** config.blocks
        for dims, what in ((self.grid_shape, "grid"), (self.image_shape, "image")):
            if dims[0] % factor or dims[1] % factor:
                raise ConfigError(f"{what} size {dims} must be divisible by {factor}")
        rng = np.random.default_rng(seed)
        widths = config.widths()
        cin = 3 * config.frames
        self.encoder = []
        for w in widths:
            self.encoder.append(ResBlock(cin, w, rng, dtype))
            cin = w
        enc_hw = (self.image_shape[0] // factor, self.image_shape[1] // factor)
        top_hw = (self.grid_shape[0] // factor, self.grid_shape[1] // factor)
        self.ortho = OrthoTransform(config.cameras, enc_hw, top_hw, config.ortho, rng, dtype)
        self.decoder = []
        for w in widths[::-1]:
            self.decoder.append(ResBlock(cin, w, rng, dtype))
            cin = w
        self.head = Conv2d(cin, NUM_CLASSES * config.horizons, 1, rng, bias=True, dtype=dtype)
        self.dtype = dtype

    def __call__(self, images: Tensor) -> Tensor:
        """``images`` is (N, cams, T, H, W, 3) in [0, 1]; returns (N, T_out, 3, rows, cols)."""
        n, cams, t, h, w, ch = images.shape
        if cams != self.config.cameras or t != self.config.frames or (h, w) != self.image_shape or ch != 3:
            raise ValueError(f"vision input {images.shape} does not match config "
                             f"({self.config.cameras} cams, {self.config.frames} frames, {self.image_shape})")
        x = F.transpose(images, (0, 1, 2, 5, 3, 4))
        x = F.reshape(x, (n * cams, t * 3, h, w))
        for block in self.encoder:
            x = F.avg_pool2d(block(x))
        _, c, eh, ew = x.shape
        y = self.ortho(F.reshape(x, (n, cams, c, eh, ew)))
        for block in self.decoder:
            y = block(F.upsample2d(y))
        return class_softmax(self.head(y), self.config.horizons)

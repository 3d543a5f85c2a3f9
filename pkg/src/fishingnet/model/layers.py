"""Parameter-holding building blocks."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from fishingnet import tensor as F
from fishingnet.tensor import Tensor


class Module:
    """Minimal container: parameters and buffers are discovered from
    attributes in assignment order, recursing into sub-modules and lists."""

    training: bool = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            yield from _walk(value, f"{prefix}{name}", "param")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, value in vars(self).items():
            if isinstance(value, np.ndarray) and name.startswith("running_"):
                yield f"{prefix}{name}", value
            else:
                yield from _walk(value, f"{prefix}{name}", "buffer")

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def num_parameters(self) -> int:
        return int(np.sum([p.data.size for p in self.parameters().values()]))

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for v in value:
                    if isinstance(v, Module):
                        yield from v.modules()

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        state.update(dict(self.named_buffers()))
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = self.state_dict()
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing {sorted(missing)[:5]}, unexpected {sorted(unexpected)[:5]}")
        for name, p in self.named_parameters():
            if state[name].shape != p.data.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.data.shape}")
            p.data = np.array(state[name], dtype=p.data.dtype)
        for name, buf in self.named_buffers():
            if state[name].shape != buf.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {buf.shape}")
            buf[...] = state[name]


def _walk(value, prefix: str, kind: str):
    if isinstance(value, Module):
        yield from (value.named_parameters(prefix + ".") if kind == "param" else value.named_buffers(prefix + "."))
    elif isinstance(value, Tensor) and kind == "param" and value.requires_grad:
        yield prefix, value
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            yield from _walk(v, f"{prefix}.{i}", kind)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator, bias: bool = True, dtype=np.float32):
        self.weight = F.he_uniform((cout, cin, k, k), cin * k * k, rng, dtype)
        self.bias = Tensor(np.zeros(cout), requires_grad=True, dtype=dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias)


class BatchNorm(Module):
    def __init__(self, channels: int, dtype=np.float32, momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(channels), requires_grad=True, dtype=dtype)
        self.beta = Tensor(np.zeros(channels), requires_grad=True, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=np.float64)
        self.running_var = np.ones(channels, dtype=np.float64)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                            self.training, self.momentum, self.eps)


class ConvBNReLU(Module):
    def __init__(self, cin: int, cout: int, rng: np.random.Generator, dtype=np.float32, relu: bool = True):
        self.conv = Conv2d(cin, cout, 3, rng, bias=False, dtype=dtype)
        self.bn = BatchNorm(cout, dtype)
        self.relu = relu

    def __call__(self, x: Tensor) -> Tensor:
        y = self.bn(self.conv(x))
        return F.relu(y) if self.relu else y


class ResBlock(Module):
    """Three 3x3 conv+BN layers with an identity (or 1x1 projected) shortcut."""

    def __init__(self, cin: int, cout: int, rng: np.random.Generator, dtype=np.float32):
        self.layers = [ConvBNReLU(cin, cout, rng, dtype), ConvBNReLU(cout, cout, rng, dtype),
                       ConvBNReLU(cout, cout, rng, dtype, relu=False)]
        if cin != cout:
            self.proj = Conv2d(cin, cout, 1, rng, bias=False, dtype=dtype)
            self.proj_bn = BatchNorm(cout, dtype)
        else:
            self.proj = None
            self.proj_bn = None

    def __call__(self, x: Tensor) -> Tensor:
        y = x
        for layer in self.layers:
            y = layer(y)
        shortcut = self.proj_bn(self.proj(x)) if self.proj is not None else x
        return F.relu(F.add(y, shortcut))

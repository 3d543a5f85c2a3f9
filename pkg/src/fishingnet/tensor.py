"""Dense arrays with tape-based reverse-mode differentiation.

Operations record themselves on the innermost active :class:`Tape`. Nothing is
recorded outside a tape, which is how inference runs::

    with Tape() as tape:
        loss = F.sum(F.relu(x))
    tape.backward(loss)       # fills x.grad if x.requires_grad

Image tensors are NCHW. "Convolution" is cross-correlation (no kernel flip)
with zero padding that preserves the spatial size. Float32 is the default
dtype; pass float64 data to run the same graph in double precision.
"""
from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from fishingnet import container

DEFAULT_DTYPE = np.float32
CHECKPOINT_MAGIC = b"FSNC"


class BackwardError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_on_tape")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        if dtype is None:
            arr = np.asarray(data)
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else DEFAULT_DTYPE
        self.data = np.array(data, dtype=dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._on_tape = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)


class _Record:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable):
        self.out = out
        self.inputs = inputs
        self.backward = backward


_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of differentiable operations."""

    def __init__(self):
        self.records: list[_Record] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.records)

    def clear(self) -> None:
        self.records.clear()

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires grad."""
        if loss.data.size != 1:
            raise BackwardError(f"loss must be a scalar, got shape {loss.shape}")
        if not self.records or not any(r.out is loss for r in self.records):
            raise BackwardError("backward called before any forward pass recorded the loss")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for rec in reversed(self.records):
            g = grads.pop(id(rec.out), None)
            if g is None:
                continue
            for inp, ig in zip(rec.inputs, rec.backward(g)):
                if ig is None or not inp.requires_grad:
                    continue
                if inp._on_tape:
                    key = id(inp)
                    grads[key] = grads[key] + ig if key in grads else ig
                else:
                    inp.grad = ig.copy() if inp.grad is None else inp.grad + ig


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def _record(out_data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.name = None
    tape = _TAPES[-1] if _TAPES else None
    out.requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    out._on_tape = out.requires_grad
    if out.requires_grad:
        tape.records.append(_Record(out, inputs, backward_fn))
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# elementwise ---------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape(a, b, "add")
    return _record(a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape(a, b, "mul")
    return _record(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    return _record(a.data * c, (a,), lambda g: (g * c,))


def mul_const(a: Tensor, c: np.ndarray) -> Tensor:
    """Elementwise product with a constant array of the same shape."""
    c = np.asarray(c, dtype=a.dtype)
    if c.shape != a.shape:
        raise ValueError(f"mul_const: shape mismatch {a.shape} vs {c.shape}")
    return _record(a.data * c, (a,), lambda g: (g * c,))


def log(a: Tensor, eps: float = 0.0) -> Tensor:
    """Natural log of ``a + eps``."""
    shifted = a.data + a.dtype.type(eps)
    return _record(np.log(shifted), (a,), lambda g: (g / shifted,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _record(a.data * mask, (a,), lambda g: (g * mask,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _record(s, (a,), bw)


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return _record(np.asarray(a.data.sum(), dtype=a.dtype), (a,),
                   lambda g: (np.broadcast_to(g, a.shape).astype(a.dtype),))


def mean(a: Tensor) -> Tensor:
    return scale(sum(a), 1.0 / a.data.size)


# shape ---------------------------------------------------------------------

def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    inv = np.argsort(axes)
    return _record(np.ascontiguousarray(a.data.transpose(axes)), (a,), lambda g: (g.transpose(inv),))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = tuple(tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


def take(a: Tensor, index: int, axis: int) -> Tensor:
    """Select one index along ``axis`` (the axis is dropped)."""

    def bw(g):
        full = np.zeros_like(a.data)
        sl = [slice(None)] * a.ndim
        sl[axis] = index
        full[tuple(sl)] = g
        return (full,)

    return _record(np.take(a.data, index, axis=axis), (a,), bw)


# layers --------------------------------------------------------------------

def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    n, c, h, w = x.shape
    if k == 1:
        return x.transpose(0, 2, 3, 1).reshape(n * h * w, c)
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # n c h w k k
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * k * k)


def _conv_forward(x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, _, h, wd = x.shape
    o = w.shape[0]
    cols = _im2col(x, w.shape[2])
    out = cols @ w.reshape(o, -1).T
    return out.reshape(n, h, wd, o).transpose(0, 3, 1, 2), cols


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride: int = 1,
           padding: str = "same") -> Tensor:
    """Stride-1 'same' cross-correlation. ``kernel`` is (out, in, k, k), k odd."""
    if stride != 1 or padding != "same":
        raise ValueError("only stride 1 with 'same' padding is supported")
    if x.ndim != 4 or kernel.ndim != 4:
        raise ValueError(f"conv2d expects NCHW input and OIkk kernel, got {x.shape} and {kernel.shape}")
    o, c, kh, kw = kernel.shape
    if c != x.shape[1]:
        raise ValueError(f"conv2d: input has {x.shape[1]} channels, kernel expects {c}")
    if kh != kw or kh % 2 == 0:
        raise ValueError("conv2d: kernel must be square with odd size")
    if bias is not None and bias.shape != (o,):
        raise ValueError(f"conv2d: bias shape {bias.shape} != ({o},)")
    out, cols = _conv_forward(x.data, kernel.data)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)
    inputs = (x, kernel) if bias is None else (x, kernel, bias)

    def bw(g):
        g_flat = g.transpose(0, 2, 3, 1).reshape(-1, o)
        dw = (g_flat.T @ cols).reshape(kernel.shape)
        dx = None
        if x.requires_grad:
            w_t = np.ascontiguousarray(kernel.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
            dx = np.ascontiguousarray(_conv_forward(g, w_t)[0])
        if bias is None:
            return (dx, dw)
        return (dx, dw, g.sum(axis=(0, 2, 3)))

    return _record(out, inputs, bw)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray, running_var: np.ndarray,
               training: bool, momentum: float = 0.9, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization over (N, H, W) for NCHW, or over N for (N, C).

    In training mode batch statistics are used (biased variance) and the
    running buffers are updated in place as
    ``running = momentum * running + (1 - momentum) * batch``.
    """
    axes = (0, 2, 3) if x.ndim == 4 else (0,)
    bshape = (1, -1, 1, 1) if x.ndim == 4 else (1, -1)
    g_ = gamma.data.reshape(bshape)
    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mu
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mu, var = running_mean.astype(x.dtype), running_var.astype(x.dtype)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(bshape)) * inv_std.reshape(bshape)
    out = g_ * xhat + beta.data.reshape(bshape)
    m = x.data.size // x.shape[1]

    def bw(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * g_
        if training:
            dx = (inv_std.reshape(bshape) / m) * (
                m * dxhat - dxhat.sum(axis=axes).reshape(bshape)
                - xhat * (dxhat * xhat).sum(axis=axes).reshape(bshape))
        else:
            dx = dxhat * inv_std.reshape(bshape)
        return (dx, dgamma, dbeta)

    return _record(out.astype(x.dtype), (x, gamma, beta), bw)


def avg_pool2d(x: Tensor, size: tuple[int, int] = (2, 2)) -> Tensor:
    """Non-overlapping mean pooling; spatial dims must divide evenly."""
    ph, pw = size
    n, c, h, w = x.shape
    if h % ph or w % pw:
        raise ValueError(f"avg_pool2d: spatial dims {(h, w)} not divisible by {size}")
    out = x.data.reshape(n, c, h // ph, ph, w // pw, pw).mean(axis=(3, 5))

    def bw(g):
        gi = np.repeat(np.repeat(g, ph, axis=2), pw, axis=3) / (ph * pw)
        return (gi.astype(x.dtype),)

    return _record(out, (x,), bw)


def upsample2d(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling."""
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def bw(g):
        return (g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return _record(out, (x,), bw)


def dense_unbiased(x: Tensor, weights: Tensor) -> Tensor:
    """``x @ weights`` over the last axis of ``x``; no bias term."""
    if x.shape[-1] != weights.shape[0]:
        raise ValueError(f"dense_unbiased: input width {x.shape[-1]} != weight rows {weights.shape[0]}")
    out = x.data @ weights.data

    def bw(g):
        x2 = x.data.reshape(-1, x.shape[-1])
        g2 = g.reshape(-1, g.shape[-1])
        return (g @ weights.data.T, x2.T @ g2)

    return _record(out, (x, weights), bw)


# parameters ----------------------------------------------------------------

def he_uniform(shape: Sequence[int], fan_in: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE,
               name: str | None = None) -> Tensor:
    bound = np.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype), requires_grad=True,
                  name=name, dtype=dtype)


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    """Write named arrays (name, shape, dtype, payload) with version header and CRC."""
    return container.write(path, CHECKPOINT_MAGIC, arrays, meta)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    return container.read(path, CHECKPOINT_MAGIC)

"""Minimal reverse-mode autodiff over numpy arrays.

Just enough machinery for small 1-D convolutional classifiers: conv1d with
same padding, dense layers, relu, average pooling, residual addition, and a
numerically stable softmax cross-entropy. Computation runs in float64;
parameters are stored as float32 (checkpoint precision) and promoted on use.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import ArgumentError, NumericalError, ShapeError


class Tensor:
    """A node in the computation tape."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents: Tuple["Tensor", ...] = (), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self._parents = parents
        self._backward: Optional[Callable[[np.ndarray], None]] = backward

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g


def backward(loss: Tensor) -> None:
    """Backpropagate from a scalar loss through the recorded tape."""
    if loss.data.shape != ():
        raise ArgumentError("backward expects a scalar loss")
    if not np.isfinite(loss.data):
        raise NumericalError("loss is not finite")
    topo: List[Tensor] = []
    seen = set()

    def visit(t: Tensor):
        stack = [(t, iter(t._parents))]
        seen.add(id(t))
        while stack:
            node, it = stack[-1]
            advanced = False
            for p in it:
                if id(p) not in seen:
                    seen.add(id(p))
                    stack.append((p, iter(p._parents)))
                    advanced = True
                    break
            if not advanced:
                topo.append(node)
                stack.pop()

    visit(loss)
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data, (a, b))

    def bwd(g):
        a._accum(g)
        b._accum(g)

    out._backward = bwd
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0), (x,))

    def bwd(g):
        x._accum(g * mask)

    out._backward = bwd
    return out


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x: (B, in), w: (in, out), b: (out,)."""
    if x.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ShapeError(f"dense shape mismatch: x {x.data.shape}, w {w.data.shape}")
    out = Tensor(x.data @ w.data + b.data, (x, w, b))

    def bwd(g):
        x._accum(g @ w.data.T)
        w._accum(x.data.T @ g)
        b._accum(g.sum(axis=0))

    out._backward = bwd
    return out


def _im2col(data: np.ndarray, k: int) -> np.ndarray:
    """(B, C, N) -> (B, C*k, N) windows under same padding (odd k)."""
    p = (k - 1) // 2
    padded = np.pad(data, ((0, 0), (0, 0), (p, p)))
    win = np.lib.stride_tricks.sliding_window_view(padded, k, axis=2)  # (B,C,N,k)
    b, c, n, _ = win.shape
    return win.transpose(0, 1, 3, 2).reshape(b, c * k, n)


def conv1d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Same-padding stride-1 1-D convolution. x: (B,C,N), w: (O,C,k), b: (O,).

    True convolution (kernel time-reversed before the sliding product), so a
    unit impulse reproduces the kernel values in order.
    """
    if x.data.ndim != 3 or w.data.ndim != 3 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(f"conv1d shape mismatch: x {x.data.shape}, w {w.data.shape}")
    k = w.data.shape[2]
    if k % 2 != 1:
        raise ArgumentError("conv1d requires an odd kernel size for same padding")
    bsz, c, n = x.data.shape
    o = w.data.shape[0]
    wf = w.data[:, :, ::-1]
    cols = _im2col(x.data, k)  # (B, C*k, N)
    cols2d = np.ascontiguousarray(cols.transpose(0, 2, 1)).reshape(bsz * n, c * k)
    wmat = wf.reshape(o, -1)  # (O, C*k)
    out_data = (cols2d @ wmat.T).reshape(bsz, n, o).transpose(0, 2, 1) + b.data[None, :, None]
    out = Tensor(out_data, (x, w, b))

    def bwd(g):
        # g: (B, O, N)
        g2d = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(bsz * n, o)
        w._accum((g2d.T @ cols2d).reshape(w.data.shape)[:, :, ::-1])
        b._accum(g2d.sum(axis=0))
        # input gradient: correlate g with the channel-transposed kernel
        wt = w.data.transpose(1, 0, 2).reshape(c, o * k)  # (C, O*k)
        gcols = _im2col(g, k)  # (B, O*k, N)
        gcols2d = np.ascontiguousarray(gcols.transpose(0, 2, 1)).reshape(bsz * n, o * k)
        x._accum((gcols2d @ wt.T).reshape(bsz, n, c).transpose(0, 2, 1))

    out._backward = bwd
    return out


def avg_pool1d(x: Tensor, width: int) -> Tensor:
    """Non-overlapping average pooling along the last axis."""
    b, c, n = x.data.shape
    if n % width != 0:
        raise ShapeError(f"length {n} not divisible by pool width {width}")
    out_data = x.data.reshape(b, c, n // width, width).mean(axis=3)
    out = Tensor(out_data, (x,))

    def bwd(g):
        x._accum(np.repeat(g, width, axis=2) / width)

    out._backward = bwd
    return out


def global_avg_pool(x: Tensor) -> Tensor:
    """(B, C, N) -> (B, C) mean over time."""
    n = x.data.shape[2]
    out = Tensor(x.data.mean(axis=2), (x,))

    def bwd(g):
        x._accum(np.repeat(g[:, :, None], n, axis=2) / n)

    out._backward = bwd
    return out


def flatten(x: Tensor) -> Tensor:
    b = x.data.shape[0]
    shape = x.data.shape
    out = Tensor(x.data.reshape(b, -1), (x,))

    def bwd(g):
        x._accum(g.reshape(shape))

    out._backward = bwd
    return out


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Sum over the batch of -log p(label). Max-subtracted for stability."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or labels.shape != (logits.data.shape[0],):
        raise ShapeError("softmax_cross_entropy expects (B, C) logits and (B,) labels")
    lsm = log_softmax(logits.data)
    out = Tensor(-lsm[np.arange(len(labels)), labels].sum(), (logits,))

    def bwd(g):
        probs = np.exp(lsm)
        grad = probs.copy()
        grad[np.arange(len(labels)), labels] -= 1.0
        logits._accum(g * grad)

    out._backward = bwd
    return out


def scale(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data * c, (x,))

    def bwd(g):
        x._accum(g * c)

    out._backward = bwd
    return out


def tsum(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum(), (x,))

    def bwd(g):
        x._accum(np.full_like(x.data, g))

    out._backward = bwd
    return out


# --- optimizers -------------------------------------------------------------


def sgd_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float) -> None:
    """In-place SGD; parameters stay float32."""
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape mismatch for {name}")
        params[name] = (p.astype(np.float64) - lr * g).astype(np.float32)


class AdamState:
    def __init__(self, params: Dict[str, np.ndarray]):
        self.m = {k: np.zeros(v.shape, dtype=np.float64) for k, v in params.items()}
        self.v = {k: np.zeros(v.shape, dtype=np.float64) for k, v in params.items()}
        self.t = 0


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place Adam with bias correction; parameters stay float32."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape mismatch for {name}")
        m = state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        v = state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        params[name] = (p.astype(np.float64) - lr * mhat / (np.sqrt(vhat) + eps)).astype(
            np.float32
        )

"""Reverse-mode automatic differentiation over dense float64 tensors.

Define-by-run: every operation records its inputs and a backward closure on
the output tensor, so the tape is rebuilt from scratch on each forward pass
and freed when the outputs go out of scope.  Only what the small conv nets in
this package need is implemented: elementwise arithmetic and activations,
matmul, strided 2d convolution and its transpose, reductions, and a fused
softmax cross-entropy.

Conventions
-----------
* All data is float64.  Images and feature maps are (B, C, H, W).
* Gradients accumulate into ``Tensor.grad``; call :func:`zero_grads` (or
  create fresh graphs) between steps.
* ``clamp`` and ``relu`` use the zero subgradient outside their active
  region and identity inside (boundary counts as inside).
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError, ShapeError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the context (forward-only evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tensor:
    """Dense float64 array with an optional place in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A new leaf sharing this tensor's values but carrying no history."""
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    """Wrap an op result; records the graph edge only when grads are live."""
    if _grad_enabled and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._parents = tuple(parents)
        out._backward = backward
        return out
    return Tensor(data)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    # First contribution keeps the incoming array so single-consumer chains
    # (the common case) stay bitwise identical to the upstream gradient.
    if t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `g` down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every reachable tensor."""
    if loss.data.ndim != 0:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(topo):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is not None and parent.requires_grad:
                _accumulate(parent, g)


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# elementwise ops
# ---------------------------------------------------------------------------

def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} do not align") from None


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "add")
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "sub")
    out = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "mul")
    out = a.data * b.data

    def bwd(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _make(out, (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def bwd(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return _make(out, (a, b), bwd)


def neg(a) -> Tensor:
    a = _wrap(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def relu(a) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), bwd)


def log(a) -> Tensor:
    a = _wrap(a)
    if np.any(a.data <= 0):
        raise DomainError("log requires strictly positive inputs")
    out = np.log(a.data)
    return _make(out, (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = _wrap(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt requires non-negative inputs")
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,))


def clamp(a, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; zero subgradient outside, identity inside."""
    a = _wrap(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


# ---------------------------------------------------------------------------
# shape & reduction ops
# ---------------------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    in_shape = a.data.shape
    out = a.data.reshape(shape)
    return _make(out, (a,), lambda g: (g.reshape(in_shape),))


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _make(out, (a,), bwd)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    if axis is None:
        n = a.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        n = int(np.prod([a.data.shape[i] for i in axes]))
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} x {b.data.shape}")
    out = a.data @ b.data

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out, (a, b), bwd)


# ---------------------------------------------------------------------------
# convolution (im2col based)
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int):
    """(B, C, Hp, Wp) -> (B, L, C*kh*kw) patch matrix with L output positions."""
    B, C, H, W = x.shape
    oh = (H - kh) // stride + 1
    ow = (W - kw) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride, :, :]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B, oh * ow, C * kh * kw)
    return np.ascontiguousarray(cols), oh, ow


def _col2im(cols: np.ndarray, shape, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add patches back onto (B, C, Hp, Wp)."""
    B, C, H, W = shape
    out = np.zeros((B, C, H, W), dtype=np.float64)
    g6 = cols.reshape(B, oh, ow, C, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += g6[..., i, j]
    return out


def _pad2d(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d(x, kernel, stride: int = 1, padding: int = 0) -> Tensor:
    """Strided cross-correlation of (B, C, H, W) with kernel (O, C, kh, kw)."""
    x, kernel = _wrap(x), _wrap(kernel)
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeError("conv2d expects 4d input and kernel")
    B, C, H, W = x.data.shape
    O, CK, kh, kw = kernel.data.shape
    if CK != C:
        raise ShapeError(f"conv2d: kernel channels {CK} != input channels {C}")
    if kh > H + 2 * padding or kw > W + 2 * padding:
        raise ShapeError("conv2d: kernel larger than padded input")
    xp = _pad2d(x.data, padding)
    cols, oh, ow = _im2col(xp, kh, kw, stride)
    k2 = kernel.data.reshape(O, C * kh * kw)
    out = (cols @ k2.T).transpose(0, 2, 1).reshape(B, O, oh, ow)

    def bwd(g):
        g2 = g.reshape(B, O, oh * ow).transpose(0, 2, 1)  # (B, L, O)
        gk = np.einsum("blo,blk->ok", g2, cols).reshape(kernel.data.shape)
        gcols = g2 @ k2
        gxp = _col2im(gcols, xp.shape, kh, kw, stride, oh, ow)
        gx = gxp if padding == 0 else gxp[:, :, padding:-padding, padding:-padding]
        return gx, gk

    return _make(out, (x, kernel), bwd)


def conv2d_transpose(x, kernel, stride: int = 1, padding: int = 0, output_padding: int = 0) -> Tensor:
    """Transposed convolution; kernel layout (C_in, C_out, kh, kw).

    Output spatial size is ``(H - 1) * stride - 2 * padding + kh + output_padding``,
    so with matching hyperparameters it restores the input size of the
    corresponding forward convolution.  Requires ``output_padding < stride``
    (or == 0 when stride is 1).
    """
    x, kernel = _wrap(x), _wrap(kernel)
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeError("conv2d_transpose expects 4d input and kernel")
    B, I, H, W = x.data.shape
    IK, O, kh, kw = kernel.data.shape
    if IK != I:
        raise ShapeError(f"conv2d_transpose: kernel in-channels {IK} != input channels {I}")
    if output_padding >= max(stride, 1) and output_padding != 0:
        raise ShapeError("conv2d_transpose: output_padding must be < stride")
    h_out = (H - 1) * stride - 2 * padding + kh + output_padding
    w_out = (W - 1) * stride - 2 * padding + kw + output_padding
    if h_out <= 0 or w_out <= 0:
        raise ShapeError("conv2d_transpose: non-positive output size")

    k2 = kernel.data.reshape(I, O * kh * kw)
    x2 = x.data.reshape(B, I, H * W).transpose(0, 2, 1)  # (B, L, I)
    full_h = (H - 1) * stride + kh
    full_w = (W - 1) * stride + kw
    full = _col2im(x2 @ k2, (B, O, full_h, full_w), kh, kw, stride, H, W)
    if output_padding:
        full = np.pad(full, ((0, 0), (0, 0), (0, output_padding), (0, output_padding)))
    out = full[:, :, padding : padding + h_out, padding : padding + w_out]

    def bwd(g):
        gfull = np.zeros((B, O, full_h + output_padding, full_w + output_padding), dtype=np.float64)
        gfull[:, :, padding : padding + h_out, padding : padding + w_out] = g
        gcols, oh, ow = _im2col(gfull, kh, kw, stride)  # oh == H, ow == W
        gx = (gcols @ k2.T).transpose(0, 2, 1).reshape(B, I, H, W)
        gk = np.einsum("bli,blk->ik", x2, gcols).reshape(kernel.data.shape)
        return gx, gk

    return _make(np.ascontiguousarray(out), (x, kernel), bwd)


# ---------------------------------------------------------------------------
# fused losses / composite layers
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label], max-stabilized."""
    logits = _wrap(logits)
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy expects (B, S) logits, got {logits.data.shape}")
    y = np.asarray(labels)
    B, S = logits.data.shape
    if y.shape != (B,):
        raise ShapeError(f"labels shape {y.shape} does not match batch {B}")
    if y.min() < 0 or y.max() >= S:
        raise DomainError(f"labels must lie in [0, {S})")
    y = y.astype(np.int64)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    loss = -logp[np.arange(B), y].mean()

    def bwd(g):
        p = np.exp(logp)
        p[np.arange(B), y] -= 1.0
        return (p * (g / B),)

    return _make(np.asarray(loss), (logits,), bwd)


def instance_norm(x, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization over the spatial axes (no affine)."""
    x = _wrap(x)
    if x.data.ndim != 4:
        raise ShapeError("instance_norm expects (B, C, H, W)")
    m = tmean(x, axis=(2, 3), keepdims=True)
    d = sub(x, m)
    v = tmean(mul(d, d), axis=(2, 3), keepdims=True)
    return div(d, sqrt(add(v, eps)))

"""Shared test helpers: independent oracles and stub RNGs.

The oracles here are deliberately naive (quadruple loops, double sums,
central differences) so they stay independent of the implementation paths
they check.
"""

import numpy as np

from geadvlab.autograd import Tensor, backward


class ConstRng:
    """Duck-typed RngStream whose normal() returns the mean exactly.

    Used to disable sampling noise in frequency-neighbor tests.
    """

    def normal(self, shape=(), mean=0.0, std=1.0):
        return np.full(shape, mean, dtype=np.float64)


def central_difference(fn, arrays, h=1e-5):
    """Numerical gradients of a scalar-valued fn(*Tensor) for each array."""
    grads = []
    for j, a in enumerate(arrays):
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = fn(*[Tensor(x) for x in arrays]).item()
            flat[i] = orig - h
            lm = fn(*[Tensor(x) for x in arrays]).item()
            flat[i] = orig
            gflat[i] = (lp - lm) / (2.0 * h)
        grads.append(g)
    return grads


def gradcheck(fn, arrays, h=1e-5):
    """Max relative error between autodiff and central-difference gradients."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = fn(*tensors)
    backward(loss)
    numeric = central_difference(fn, arrays, h=h)
    worst = 0.0
    for t, n in zip(tensors, numeric):
        rel = np.abs(t.grad - n) / np.maximum(np.abs(n), 1.0)
        worst = max(worst, float(rel.max()))
    return worst


def conv2d_naive(x, kernel, stride=1, padding=0):
    """Direct quadruple-loop cross-correlation."""
    B, C, H, W = x.shape
    O, _, kh, kw = kernel.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (H + 2 * padding - kh) // stride + 1
    ow = (W + 2 * padding - kw) // stride + 1
    out = np.zeros((B, O, oh, ow))
    for b in range(B):
        for o in range(O):
            for i in range(oh):
                for j in range(ow):
                    window = xp[b, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[b, o, i, j] = np.sum(window * kernel[o])
    return out


def conv2d_transpose_naive(x, kernel, stride=1, padding=0, output_padding=0):
    """Direct scatter-sum transposed convolution; kernel (I, O, kh, kw)."""
    B, I, H, W = x.shape
    _, O, kh, kw = kernel.shape
    h_out = (H - 1) * stride - 2 * padding + kh + output_padding
    w_out = (W - 1) * stride - 2 * padding + kw + output_padding
    full = np.zeros((B, O, (H - 1) * stride + kh + output_padding,
                     (W - 1) * stride + kw + output_padding))
    for b in range(B):
        for i in range(H):
            for j in range(W):
                for c in range(I):
                    full[b, :, i * stride:i * stride + kh, j * stride:j * stride + kw] += \
                        x[b, c, i, j] * kernel[c]
    return full[:, :, padding:padding + h_out, padding:padding + w_out]


def dct2_naive(x):
    """Double-sum orthonormal type-II 2D DCT of one H x W image."""
    H, W = x.shape
    out = np.zeros((H, W))
    for u in range(H):
        for v in range(W):
            au = np.sqrt(1.0 / H) if u == 0 else np.sqrt(2.0 / H)
            av = np.sqrt(1.0 / W) if v == 0 else np.sqrt(2.0 / W)
            s = 0.0
            for k in range(H):
                for m in range(W):
                    s += x[k, m] * np.cos(np.pi * (2 * k + 1) * u / (2 * H)) \
                        * np.cos(np.pi * (2 * m + 1) * v / (2 * W))
            out[u, v] = au * av * s
    return out


def idct2_naive(c):
    """Double-sum inverse of the orthonormal type-II 2D DCT."""
    H, W = c.shape
    out = np.zeros((H, W))
    for k in range(H):
        for m in range(W):
            s = 0.0
            for u in range(H):
                for v in range(W):
                    au = np.sqrt(1.0 / H) if u == 0 else np.sqrt(2.0 / H)
                    av = np.sqrt(1.0 / W) if v == 0 else np.sqrt(2.0 / W)
                    s += au * av * c[u, v] * np.cos(np.pi * (2 * k + 1) * u / (2 * H)) \
                        * np.cos(np.pi * (2 * m + 1) * v / (2 * W))
            out[k, m] = s
    return out


def params_bytes(net):
    """Concatenated raw bytes of all parameters (for bitwise comparisons)."""
    return b"".join(t.data.tobytes() for t in net.params.values())

"""Gradient-based attacks and the gradient-editing rule.

``compute_ge`` produces the editing direction: the negated sign of the
classifier's input gradient, averaged over frequency-domain neighbor samples
of the current adversarial batch.  ``ge_surrogate_loss`` is the linear loss
whose backward pass delivers exactly that direction (scaled by 1/batch) to
the generator, standing in for the adversarial loss term during training.

FGSM and the momentum-iterative attack are the single-step and iterative
baselines.  Both take step sizes on the [0, 1] pixel scale and clip their
outputs to the valid range and to the max-norm box around the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor, backward
from .errors import ConfigError, ShapeError
from .models import NetworkParams, classifier_logits, frozen
from .rng import RngStream
from .spectral import SpectralConfig, sample_frequency_neighbors


@dataclass(frozen=True)
class GeDirection:
    """Per-pixel editing direction; every entry is -1, 0, or +1."""

    values: np.ndarray


def input_gradient(f_net: NetworkParams, x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(cross-entropy)/d(input) for a batch, with the classifier frozen."""
    xt = Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)
    with frozen(f_net):
        loss = ag.softmax_cross_entropy(classifier_logits(f_net, xt), labels)
        backward(loss)
    return xt.grad


def compute_ge(f_source: NetworkParams, x_adv: np.ndarray, true_labels: np.ndarray,
               cfg: SpectralConfig, rng: RngStream) -> GeDirection:
    """Editing direction from frequency-neighbor input gradients.

    Draws cfg.n_samples neighbors of the (constant) adversarial batch,
    averages the per-neighbor input gradients of the source classifier's
    cross-entropy in index order, and returns -sign of the average
    (sign(0) = 0).  Recomputed fresh for every generator step; never touches
    generator, discriminator, or classifier parameters.
    """
    x_adv = np.asarray(x_adv, dtype=np.float64)
    y = np.asarray(true_labels)
    neighbors = sample_frequency_neighbors(x_adv, cfg, rng)
    acc = np.zeros_like(x_adv)
    for i in range(cfg.n_samples):
        acc += input_gradient(f_source, neighbors[i], y)
    return GeDirection(values=-np.sign(acc / cfg.n_samples))


def ge_surrogate_loss(x: Tensor, g_out: Tensor, ge: GeDirection, batch_size: int | None = None) -> Tensor:
    """Linear stand-in for the adversarial loss under gradient editing.

    Returns (1/B) * sum((x + G(x)) * ge) over all samples and pixels.  The
    editing direction carries no autodiff history, so the gradient reaching
    the x + G(x) node is exactly ge / B; descending this loss therefore moves
    the adversarial image along -ge, i.e. up the averaged loss slope that ge
    negates.  The batch mean keeps the scale of the replaced per-sample loss.
    """
    if x.shape != g_out.shape or x.shape != ge.values.shape:
        raise ShapeError(
            f"surrogate loss shapes differ: x {x.shape}, G(x) {g_out.shape}, ge {ge.values.shape}")
    b = batch_size if batch_size is not None else x.shape[0]
    x_adv = ag.add(x, g_out)
    return ag.mul(ag.tsum(ag.mul(x_adv, Tensor(ge.values))), 1.0 / b)


def fgsm_step(f_net: NetworkParams, x: np.ndarray, labels: np.ndarray, eta: float) -> np.ndarray:
    """One signed-gradient ascent step on the cross-entropy.

    `eta` is on the [0, 1] pixel scale.  The result is clipped to the
    eta-box around x and to [0, 1].
    """
    x = np.asarray(x, dtype=np.float64)
    g = input_gradient(f_net, x, labels)
    x_adv = x + eta * np.sign(g)
    return np.clip(np.clip(x_adv, x - eta, x + eta), 0.0, 1.0)


def mim_attack(f_net: NetworkParams, x: np.ndarray, labels: np.ndarray,
               epsilon: float, steps: int, decay_mu: float = 1.0) -> np.ndarray:
    """Momentum-iterative signed-gradient attack.

    `epsilon` is the total budget on the [0, 1] scale; each of the `steps`
    iterations moves by epsilon/steps along the sign of the accumulated
    momentum (L1-normalized gradients), clipping to the epsilon-box and
    [0, 1] after every step.
    """
    if steps < 1:
        raise ConfigError("mim_attack requires steps >= 1")
    x = np.asarray(x, dtype=np.float64)
    alpha = epsilon / steps
    momentum = np.zeros_like(x)
    x_adv = x.copy()
    for _ in range(steps):
        g = input_gradient(f_net, x_adv, labels)
        l1 = np.abs(g).reshape(g.shape[0], -1).sum(axis=1)
        l1 = np.maximum(l1, 1e-12).reshape((-1,) + (1,) * (g.ndim - 1))
        momentum = decay_mu * momentum + g / l1
        x_adv = np.clip(np.clip(x_adv + alpha * np.sign(momentum), x - epsilon, x + epsilon), 0.0, 1.0)
    return x_adv

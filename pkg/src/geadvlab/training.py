"""Alternating GAN training (vanilla and gradient-edited) and the supervised
classifier trainer.

The GAN loop runs, per batch: `disc_steps` discriminator updates on
(real, fake), then `gen_steps` generator updates.  In "ge" mode each
generator step first recomputes the editing direction on the current,
detached adversarial batch; the adversarial loss term is then the linear
surrogate instead of the classifier cross-entropy.  Discriminator updates go
through the same function in both modes, and the source classifier is never
updated.

The two-phase schedule switches step counts and learning rates at
`change_epoch`; optimizer state carries across the switch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import autograd as ag
from .attacks import compute_ge, fgsm_step, ge_surrogate_loss
from .autograd import Tensor, backward
from .errors import ConfigError, NumericalError
from .losses import (LossWeights, l_adv_targeted, l_adv_untargeted, l_gan,
                     l_gan_generator, l_hinge, total_loss)
from .models import (NetworkParams, classifier_logits, frozen,
                     generate_perturbation, predict_labels)
from .optim import make_optimizer
from .rng import RngStream
from .spectral import SpectralConfig

TRAIN_LOG_COLUMNS = ("epoch", "disc_loss", "gen_adv", "gen_gan", "gen_hinge", "probe_asr")


@dataclass(frozen=True)
class TrainSchedule:
    """Two-phase alternating-update schedule."""

    epochs: int = 60
    change_epoch: int = 30
    gen_steps: tuple = (2, 1)
    disc_steps: tuple = (1, 1)
    gen_lr: tuple = (1e-4, 1e-4)
    disc_lr: tuple = (1e-4, 1e-4)
    batch_size: int = 64

    def __post_init__(self):
        if not (0 < self.change_epoch <= self.epochs):
            raise ConfigError("change_epoch must lie in (0, epochs]")
        if min(self.gen_steps) < 0 or min(self.disc_steps) < 0:
            raise ConfigError("step counts must be >= 0")
        if min(self.gen_lr) <= 0 or min(self.disc_lr) <= 0:
            raise ConfigError("learning rates must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    disc_loss: float
    gen_adv: float
    gen_gan: float
    gen_hinge: float
    probe_asr: float

    def as_row(self) -> list:
        return [self.epoch, self.disc_loss, self.gen_adv, self.gen_gan,
                self.gen_hinge, self.probe_asr]


def _clip01(a: np.ndarray) -> np.ndarray:
    return np.clip(a, 0.0, 1.0)


def adversarial_batch(g_net: NetworkParams, x: np.ndarray, epsilon: float) -> np.ndarray:
    """clip01(x + G(x)) with no graph recording (attack/evaluation forward)."""
    with ag.no_grad():
        delta = generate_perturbation(g_net, Tensor(x), epsilon)
    return _clip01(x + delta.data)


def white_box_asr(f_net: NetworkParams, g_net: NetworkParams, x: np.ndarray,
                  y: np.ndarray, epsilon: float) -> float:
    x_adv = adversarial_batch(g_net, x, epsilon)
    return float(np.mean(predict_labels(f_net, x_adv) != np.asarray(y)))


def discriminator_step(g_net: NetworkParams, d_net: NetworkParams, x: np.ndarray,
                       epsilon: float, d_opt) -> float:
    """One discriminator update on (real, fake); identical in both modes."""
    x_adv = adversarial_batch(g_net, x, epsilon)
    d_net.zero_grads()
    disc_loss, _ = l_gan(d_net, Tensor(x), Tensor(x_adv))
    backward(disc_loss)
    d_opt.step()
    return disc_loss.item()


def generator_step(mode: str, g_net: NetworkParams, d_net: NetworkParams,
                   f_net: NetworkParams, x: np.ndarray, y: np.ndarray,
                   weights: LossWeights, epsilon: float,
                   spectral_cfg: Optional[SpectralConfig], rng: RngStream,
                   g_opt, target_class: Optional[int] = None) -> tuple:
    """One generator update; returns (adv, gan, hinge) loss values."""
    if mode == "ge":
        x_adv_const = adversarial_batch(g_net, x, epsilon)
        ge_dir = compute_ge(f_net, x_adv_const, y, spectral_cfg, rng)
    g_net.zero_grads()
    x_t = Tensor(x)
    delta = generate_perturbation(g_net, x_t, epsilon)
    x_adv = ag.clamp(ag.add(x_t, delta), 0.0, 1.0)
    if mode == "ge":
        adv = ge_surrogate_loss(x_t, delta, ge_dir)
    elif target_class is not None:
        targets = np.full(x.shape[0], target_class, dtype=np.int64)
        with frozen(f_net):
            adv = l_adv_targeted(f_net, x_adv, targets)
    else:
        with frozen(f_net):
            adv = l_adv_untargeted(f_net, x_adv, y)
    with frozen(d_net):
        gan_gen = l_gan_generator(d_net, x_adv)
    hinge = l_hinge(delta, weights.c)
    loss = total_loss(weights, adv, gan_gen, hinge)
    backward(loss)
    g_opt.step()
    return adv.item(), gan_gen.item(), hinge.item()


def train_advgan(g_net: NetworkParams, d_net: NetworkParams, f_source: NetworkParams,
                 images: np.ndarray, labels: np.ndarray, weights: LossWeights,
                 schedule: TrainSchedule, mode: str, spectral_cfg: Optional[SpectralConfig],
                 rng: RngStream, probe_images: Optional[np.ndarray] = None,
                 probe_labels: Optional[np.ndarray] = None, epsilon: float = 16.0,
                 optimizer: str = "adam", target_class: Optional[int] = None,
                 on_epoch=None) -> List[EpochRecord]:
    """Train G and D against a frozen source classifier; returns per-epoch log.

    `epsilon` is on the 0-255 scale.  `mode` is "vanilla" or "ge"; "ge"
    requires a SpectralConfig.  `on_epoch`, when given, is called with each
    EpochRecord as it is produced (the CLI streams the CSV log through it).
    """
    if mode not in ("vanilla", "ge"):
        raise ConfigError(f"unknown training mode: {mode!r}")
    if mode == "ge" and spectral_cfg is None:
        raise ConfigError("ge mode requires a spectral config")
    if mode == "ge" and target_class is not None:
        raise ConfigError("targeted attacks are only supported in vanilla mode")
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    n = images.shape[0]
    if n == 0:
        raise ConfigError("training dataset is empty")

    g_opt = make_optimizer(optimizer, g_net.tensors(), schedule.gen_lr[0])
    d_opt = make_optimizer(optimizer, d_net.tensors(), schedule.disc_lr[0])
    records: List[EpochRecord] = []
    for epoch in range(schedule.epochs):
        phase = 0 if epoch < schedule.change_epoch else 1
        g_opt.lr = schedule.gen_lr[phase]
        d_opt.lr = schedule.disc_lr[phase]
        perm = rng.permutation(n)
        sums = np.zeros(4)
        counts = np.zeros(4)
        for lo in range(0, n, schedule.batch_size):
            idx = perm[lo:lo + schedule.batch_size]
            x, y = images[idx], labels[idx]
            for _ in range(schedule.disc_steps[phase]):
                d_val = discriminator_step(g_net, d_net, x, epsilon, d_opt)
                if not np.isfinite(d_val):
                    raise NumericalError(
                        f"non-finite discriminator loss at epoch {epoch}, batch {lo // schedule.batch_size}")
                sums[0] += d_val
                counts[0] += 1
            for _ in range(schedule.gen_steps[phase]):
                vals = generator_step(mode, g_net, d_net, f_source, x, y, weights,
                                      epsilon, spectral_cfg, rng, g_opt, target_class)
                if not np.all(np.isfinite(vals)):
                    raise NumericalError(
                        f"non-finite generator loss at epoch {epoch}, batch {lo // schedule.batch_size}")
                sums[1:] += vals
                counts[1:] += 1
        means = np.divide(sums, counts, out=np.full(4, np.nan), where=counts > 0)
        asr = (white_box_asr(f_source, g_net, probe_images, probe_labels, epsilon)
               if probe_images is not None else float("nan"))
        rec = EpochRecord(epoch, float(means[0]), float(means[1]), float(means[2]),
                          float(means[3]), asr)
        records.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    return records


# ---------------------------------------------------------------------------
# supervised classifier training
# ---------------------------------------------------------------------------

@dataclass
class ClassifierEpoch:
    epoch: int
    train_loss: float
    train_accuracy: float


def train_classifier(net: NetworkParams, images: np.ndarray, labels: np.ndarray,
                     epochs: int, lr: float, batch_size: int, rng: RngStream,
                     adversarial_epsilon: Optional[float] = None,
                     optimizer: str = "adam", on_epoch=None) -> List[ClassifierEpoch]:
    """Plain cross-entropy training; optionally FGSM-adversarial.

    With `adversarial_epsilon` (0-255 scale) set, the first half of every
    batch is replaced by FGSM examples generated against the current weights,
    which is the usual mixed-batch adversarial training recipe.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    n = images.shape[0]
    if n == 0:
        raise ConfigError("training dataset is empty")
    opt = make_optimizer(optimizer, net.tensors(), lr)
    history: List[ClassifierEpoch] = []
    for epoch in range(epochs):
        perm = rng.permutation(n)
        loss_sum, hit_sum, seen = 0.0, 0, 0
        for lo in range(0, n, batch_size):
            idx = perm[lo:lo + batch_size]
            x, y = images[idx], labels[idx]
            if adversarial_epsilon is not None and len(idx) >= 2:
                half = len(idx) // 2
                x = x.copy()
                x[:half] = fgsm_step(net, x[:half], y[:half], adversarial_epsilon / 255.0)
            net.zero_grads()
            logits = classifier_logits(net, Tensor(x))
            loss = ag.softmax_cross_entropy(logits, y)
            if not np.isfinite(loss.item()):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            backward(loss)
            opt.step()
            loss_sum += loss.item() * len(idx)
            hit_sum += int(np.sum(np.argmax(logits.data, axis=1) == y))
            seen += len(idx)
        rec = ClassifierEpoch(epoch, loss_sum / seen, hit_sum / seen)
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    return history


def accuracy(net: NetworkParams, images: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(predict_labels(net, np.asarray(images, dtype=np.float64))
                         == np.asarray(labels)))

"""Scikit-learn style estimators wrapping the classifiers and attacks.

These give the package a fit/transform/predict surface that composes with
the wider ecosystem (`get_params`/`set_params`/`clone` all work); the
algorithmic machinery lives in the underlying modules.

All `epsilon` parameters here are quoted on the 0-255 pixel scale.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError
from .losses import LossWeights
from .models import (build_classifier, build_discriminator, build_generator,
                     classifier_logits, predict_labels)
from .rng import RngStream
from .spectral import SpectralConfig
from .training import (TrainSchedule, adversarial_batch, train_advgan,
                       train_classifier)
from .validation import check_fitted_classifier, check_images, check_labels


class TinyCnnClassifier(BaseEstimator, ClassifierMixin):
    """Small image classifier trained with Adam on cross-entropy.

    Parameters
    ----------
    arch : str
        One of "classifier_a" (conv-heavy), "classifier_b" (conv-light),
        "classifier_c" (dense-only).
    epochs, lr, batch_size : training loop knobs.
    adversarial_epsilon : float or None
        When set, half of every batch is replaced by FGSM examples at this
        budget (0-255 scale): mixed-batch adversarial training.
    seed : int
        Controls initialization and batch order; equal seeds give
        bitwise-equal parameters.
    """

    def __init__(self, arch: str = "classifier_a", epochs: int = 6, lr: float = 1e-3,
                 batch_size: int = 64, seed: int = 0,
                 adversarial_epsilon: Optional[float] = None, optimizer: str = "adam"):
        self.arch = arch
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.adversarial_epsilon = adversarial_epsilon
        self.optimizer = optimizer

    def fit(self, X, y):
        X = check_images(X)
        y = check_labels(y, X.shape[0])
        self.classes_ = np.unique(y)
        n_classes = int(self.classes_.max()) + 1
        self.network_ = build_classifier(self.arch, X.shape[1:], n_classes, self.seed)
        self.history_ = train_classifier(
            self.network_, X, y, epochs=self.epochs, lr=self.lr,
            batch_size=self.batch_size, rng=RngStream(self.seed),
            adversarial_epsilon=self.adversarial_epsilon, optimizer=self.optimizer)
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_images(X, self.network_.arch.input_shape)
        return predict_labels(self.network_, X)

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_images(X, self.network_.arch.input_shape)
        with ag.no_grad():
            logits = classifier_logits(self.network_, Tensor(X)).data
        z = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(z)
        return p / p.sum(axis=1, keepdims=True)


class AdvGanAttack(BaseEstimator, TransformerMixin):
    """Perturbation-generator attack trained against a source classifier.

    `fit(X, y)` trains the generator/discriminator pair; `transform(X)`
    applies the trained generator: clip01(x + G(x)), with |G(x)|_inf bounded
    by epsilon/255 by construction.  `mode="ge"` trains with the
    frequency-guided gradient-editing rule, `mode="vanilla"` with the plain
    adversarial loss.
    """

    def __init__(self, classifier=None, mode: str = "ge", epsilon: float = 16.0,
                 adv_lambda: float = 10.0, alpha: float = 1.0, beta: float = 1.0,
                 c: float = 1.0, epochs: int = 60, change_epoch: int = 30,
                 gen_steps=(2, 1), disc_steps=(1, 1), gen_lr=(1e-4, 1e-4),
                 disc_lr=(1e-4, 1e-4), batch_size: int = 64, n_neighbors: int = 10,
                 sigma: float = 0.5, seed: int = 0, optimizer: str = "adam"):
        self.classifier = classifier
        self.mode = mode
        self.epsilon = epsilon
        self.adv_lambda = adv_lambda
        self.alpha = alpha
        self.beta = beta
        self.c = c
        self.epochs = epochs
        self.change_epoch = change_epoch
        self.gen_steps = gen_steps
        self.disc_steps = disc_steps
        self.gen_lr = gen_lr
        self.disc_lr = disc_lr
        self.batch_size = batch_size
        self.n_neighbors = n_neighbors
        self.sigma = sigma
        self.seed = seed
        self.optimizer = optimizer

    def fit(self, X, y):
        source = check_fitted_classifier(self.classifier)
        X = check_images(X, source.arch.input_shape)
        y = check_labels(y, X.shape[0], source.arch.class_count)
        schedule = TrainSchedule(
            epochs=self.epochs, change_epoch=self.change_epoch,
            gen_steps=tuple(self.gen_steps), disc_steps=tuple(self.disc_steps),
            gen_lr=tuple(self.gen_lr), disc_lr=tuple(self.disc_lr),
            batch_size=self.batch_size)
        weights = LossWeights(adv_lambda=self.adv_lambda, alpha=self.alpha,
                              beta=self.beta, c=self.c)
        spectral = (SpectralConfig(sigma=self.sigma, n_samples=self.n_neighbors,
                                   epsilon=self.epsilon)
                    if self.mode == "ge" else None)
        self.generator_ = build_generator(source.arch.input_shape, self.seed)
        self.discriminator_ = build_discriminator(source.arch.input_shape, self.seed + 1)
        self.log_ = train_advgan(
            self.generator_, self.discriminator_, source, X, y, weights, schedule,
            mode=self.mode, spectral_cfg=spectral, rng=RngStream(self.seed + 2),
            epsilon=self.epsilon, optimizer=self.optimizer)
        return self

    def transform(self, X):
        check_is_fitted(self, "generator_")
        X = check_images(X, self.generator_.arch.input_shape)
        return adversarial_batch(self.generator_, X, self.epsilon)


class _GradientAttackBase(BaseEstimator, TransformerMixin):
    """Shared plumbing for the label-dependent one-off attacks.

    `perturb(X, y)` attacks with explicit labels; `transform(X)` falls back
    to the source classifier's own predictions (avoids label leaking and
    keeps the sklearn transformer signature).
    """

    def fit(self, X=None, y=None):
        self.network_ = check_fitted_classifier(self.classifier)
        return self

    def transform(self, X):
        return self.perturb(X)

    def perturb(self, X, y=None):
        check_is_fitted(self, "network_")
        X = check_images(X, self.network_.arch.input_shape)
        if y is None:
            y = predict_labels(self.network_, X)
        y = check_labels(y, X.shape[0], self.network_.arch.class_count)
        return self._attack(X, y)

    def _attack(self, X, y):  # pragma: no cover
        raise NotImplementedError


class FgsmAttack(_GradientAttackBase):
    """Single-step signed-gradient attack at budget epsilon (0-255 scale)."""

    def __init__(self, classifier=None, epsilon: float = 16.0):
        self.classifier = classifier
        self.epsilon = epsilon

    def _attack(self, X, y):
        from .attacks import fgsm_step
        return fgsm_step(self.network_, X, y, self.epsilon / 255.0)


class MimAttack(_GradientAttackBase):
    """Momentum-iterative signed-gradient attack (0-255 scale budget)."""

    def __init__(self, classifier=None, epsilon: float = 16.0, steps: int = 10,
                 decay_mu: float = 1.0):
        self.classifier = classifier
        self.epsilon = epsilon
        self.steps = steps
        self.decay_mu = decay_mu

    def _attack(self, X, y):
        from .attacks import mim_attack
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        return mim_attack(self.network_, X, y, self.epsilon / 255.0,
                          steps=self.steps, decay_mu=self.decay_mu)

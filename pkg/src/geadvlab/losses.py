"""Loss terms for the adversarial GAN: the adversarial classification term,
the GAN realism term, the soft hinge on perturbation magnitude, and their
weighted combination.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, ShapeError
from .models import NetworkParams, classifier_logits, discriminator_score


@dataclass(frozen=True)
class LossWeights:
    """adv_lambda scales the adversarial term; alpha the GAN term; beta the
    hinge term; c is the hinge's bound on the per-sample L2 perturbation."""

    adv_lambda: float = 10.0
    alpha: float = 1.0
    beta: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if min(self.adv_lambda, self.alpha, self.beta, self.c) < 0:
            raise ConfigError("loss weights must be non-negative")


def l_adv_targeted(f_net: NetworkParams, x_adv: Tensor, target_labels) -> Tensor:
    """Cross-entropy toward the attacker's target class; minimizing it drives
    predictions to the target."""
    return ag.softmax_cross_entropy(classifier_logits(f_net, x_adv), target_labels)


def l_adv_untargeted(f_net: NetworkParams, x_adv: Tensor, true_labels) -> Tensor:
    """Negative cross-entropy w.r.t. the true label; minimizing it pushes
    predictions away from the truth."""
    return ag.neg(ag.softmax_cross_entropy(classifier_logits(f_net, x_adv), true_labels))


def l_gan(d_net: NetworkParams, x: Tensor, x_adv: Tensor):
    """(disc_loss, gen_loss) of the two-player game.

    disc_loss = -(E log D(x) + E log(1 - D(x_adv))), which the discriminator
    minimizes; gen_loss = E log(1 - D(x_adv)), which the generator minimizes.
    Scores arrive already clamped to [1e-12, 1 - 1e-12].
    """
    if x.shape != x_adv.shape:
        raise ShapeError(f"real/fake batch shapes differ: {x.shape} vs {x_adv.shape}")
    d_real = discriminator_score(d_net, x)
    d_fake = discriminator_score(d_net, x_adv)
    log_real = ag.tmean(ag.log(d_real))
    log_one_minus_fake = ag.tmean(ag.log(ag.sub(1.0, d_fake)))
    disc_loss = ag.neg(ag.add(log_real, log_one_minus_fake))
    return disc_loss, log_one_minus_fake


def l_gan_generator(d_net: NetworkParams, x_adv: Tensor) -> Tensor:
    """Generator half of the GAN objective alone: E log(1 - D(x_adv))."""
    d_fake = discriminator_score(d_net, x_adv)
    return ag.tmean(ag.log(ag.sub(1.0, d_fake)))


def l_hinge(perturbation: Tensor, c: float) -> Tensor:
    """E max(0, ||delta||_2 - c); the L2 norm is over all pixels per sample."""
    if c < 0:
        raise ConfigError("hinge bound c must be >= 0")
    b = perturbation.shape[0]
    flat = ag.reshape(perturbation, (b, -1))
    # 1e-24 keeps sqrt's gradient finite at exactly-zero perturbations
    norms = ag.sqrt(ag.add(ag.tsum(ag.mul(flat, flat), axis=1), 1e-24))
    return ag.tmean(ag.relu(ag.sub(norms, float(c))))


def total_loss(weights: LossWeights, adv: Tensor, gan_gen: Tensor, hinge: Tensor) -> Tensor:
    """adv_lambda * L_adv + alpha * L_GAN(gen) + beta * L_hinge."""
    return ag.add(
        ag.add(ag.mul(adv, weights.adv_lambda), ag.mul(gan_gen, weights.alpha)),
        ag.mul(hinge, weights.beta),
    )

import numpy as np
import pytest

from geadvlab import autograd as ag
from geadvlab.autograd import Tensor, backward
from geadvlab.errors import ConfigError, ShapeError
from geadvlab.losses import (LossWeights, l_adv_targeted, l_adv_untargeted,
                             l_gan, l_gan_generator, l_hinge, total_loss)
from geadvlab.models import (ArchDescriptor, Dense, Flatten, build_classifier,
                             build_discriminator, init_params)
from geadvlab.optim import Adam
from geadvlab.rng import RngStream

from util import gradcheck


def _zero_classifier(classes=10, shape=(1, 4, 4)):
    net = build_classifier("classifier_c", shape, classes, seed=0)
    for t in net.params.values():
        t.data[...] = 0.0
    return net


def _linear_classifier(weight, shape):
    """Flatten -> Dense(S) with a handcrafted weight matrix, zero bias."""
    arch = ArchDescriptor("classifier_c", shape, weight.shape[1],
                          layers=(Flatten(), Dense(weight.shape[1])))
    net = init_params(arch, seed=0)
    net.params["1.weight"].data[...] = weight
    net.params["1.bias"].data[...] = 0.0
    return net


def test_targeted_uniform_logits():
    net = _zero_classifier()
    x = Tensor(RngStream(0).uniform((4, 1, 4, 4)))
    loss = l_adv_targeted(net, x, np.array([1, 2, 3, 4]))
    assert abs(loss.item() - np.log(10.0)) < 1e-12


def test_targeted_confident_hit_is_near_zero():
    net = _zero_classifier()
    # drive the final bias for class 0 very high: predictions one-hot at 0
    final_bias = list(net.params)[-1]
    net.params[final_bias].data[0] = 1000.0
    x = Tensor(RngStream(1).uniform((3, 1, 4, 4)))
    assert l_adv_targeted(net, x, np.array([0, 0, 0])).item() < 1e-9


def test_untargeted_is_negated_cross_entropy():
    net = _zero_classifier()
    x = Tensor(RngStream(2).uniform((4, 1, 4, 4)))
    loss = l_adv_untargeted(net, x, np.array([0, 1, 2, 3]))
    assert abs(loss.item() + np.log(10.0)) < 1e-12


def test_untargeted_descent_reduces_true_class_probability():
    # a handcrafted linear model; descending the untargeted loss over the
    # input must push the true-class softmax probability down monotonically
    rng = RngStream(3)
    w = rng.normal((16, 3))
    net = _linear_classifier(w, (1, 4, 4))
    x = Tensor(rng.uniform((2, 1, 4, 4)), requires_grad=True)
    y = np.array([0, 1])
    opt = Adam([x], lr=0.05)

    def true_prob():
        with ag.no_grad():
            logits = ag.matmul(ag.reshape(x, (2, -1)), Tensor(w)).data
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        return p[np.arange(2), y]

    probs = [true_prob()]
    for _ in range(10):
        x.grad = None
        backward(l_adv_untargeted(net, x, y))
        opt.step()
        probs.append(true_prob())
    for before, after in zip(probs, probs[1:]):
        assert np.all(after <= before + 1e-12)


def test_adv_loss_gradient_matches_finite_differences():
    net = build_classifier("classifier_c", (1, 4, 4), 5, seed=4)
    y = np.array([0, 3])
    x0 = RngStream(5).uniform((2, 1, 4, 4))
    err = gradcheck(lambda t: l_adv_untargeted(net, t, y), [x0])
    assert err < 1e-4


def test_gan_loss_half_scores():
    d = build_discriminator((1, 4, 4), 0)
    for t in d.params.values():
        t.data[...] = 0.0
    x = Tensor(RngStream(6).uniform((3, 1, 4, 4)))
    x_adv = Tensor(RngStream(7).uniform((3, 1, 4, 4)))
    disc_loss, gen_loss = l_gan(d, x, x_adv)
    assert abs(disc_loss.item() - 2 * np.log(2.0)) < 1e-12
    assert abs(gen_loss.item() + np.log(2.0)) < 1e-12


def test_gan_loss_formula_consistency():
    from geadvlab.models import discriminator_score

    d = build_discriminator((1, 4, 4), 1)
    x = Tensor(RngStream(8).uniform((4, 1, 4, 4)))
    x_adv = Tensor(RngStream(9).uniform((4, 1, 4, 4)))
    disc_loss, gen_loss = l_gan(d, x, x_adv)
    with ag.no_grad():
        dr = discriminator_score(d, x).data
        df = discriminator_score(d, x_adv).data
    assert abs(disc_loss.item() + np.mean(np.log(dr)) + np.mean(np.log(1 - df))) < 1e-12
    assert abs(gen_loss.item() - np.mean(np.log(1 - df))) < 1e-12
    assert abs(l_gan_generator(d, x_adv).item() - gen_loss.item()) < 1e-15


def test_gan_batch_shape_mismatch():
    d = build_discriminator((1, 4, 4), 1)
    with pytest.raises(ShapeError):
        l_gan(d, Tensor(np.zeros((2, 1, 4, 4))), Tensor(np.zeros((3, 1, 4, 4))))


def test_discriminator_step_decreases_loss_on_separable_batch():
    d = build_discriminator((1, 4, 4), 2)
    x = Tensor(np.full((8, 1, 4, 4), 0.9))
    x_adv = Tensor(np.full((8, 1, 4, 4), 0.1))
    opt = Adam([t for t in d.params.values()], lr=1e-2)
    loss0, _ = l_gan(d, x, x_adv)
    backward(loss0)
    opt.step()
    d.zero_grads()
    loss1, _ = l_gan(d, x, x_adv)
    assert loss1.item() < loss0.item()


def test_hinge_inside_bound_is_zero():
    delta = Tensor(np.full((1, 1, 2, 2), 0.25))  # L2 norm 0.5
    assert l_hinge(delta, c=1.0).item() == 0.0


def test_hinge_arithmetic():
    delta = Tensor(np.full((1, 1, 2, 2), 1.0))  # L2 norm 2
    assert abs(l_hinge(delta, c=1.0).item() - 1.0) < 1e-12


def test_hinge_zero_gradient_inside_bound():
    delta = Tensor(np.full((2, 1, 2, 2), 0.1), requires_grad=True)
    backward(l_hinge(delta, c=1.0))
    assert np.array_equal(delta.grad, np.zeros((2, 1, 2, 2)))


def test_hinge_stable_at_exact_zero():
    delta = Tensor(np.zeros((2, 1, 2, 2)), requires_grad=True)
    backward(l_hinge(delta, c=1.0))
    assert np.all(np.isfinite(delta.grad))


def test_total_loss_zero():
    z = Tensor(np.zeros(()))
    assert total_loss(LossWeights(), z, z, z).item() == 0.0


def test_total_loss_arithmetic():
    one = Tensor(np.ones(()))
    w = LossWeights(adv_lambda=10.0, alpha=1.0, beta=1.0, c=1.0)
    assert total_loss(w, one, one, one).item() == 12.0


def test_total_loss_gradient_linearity():
    w = LossWeights(adv_lambda=10.0, alpha=2.0, beta=0.5, c=1.0)
    base = RngStream(10).normal((3, 3))

    def parts(x):
        return ag.tsum(x), ag.tsum(ag.mul(x, x)), ag.tsum(ag.tanh(x))

    # each part node receives exactly its weight as incoming gradient
    x = Tensor(base, requires_grad=True)
    p = parts(x)
    backward(total_loss(w, *p))
    assert float(p[0].grad) == w.adv_lambda
    assert float(p[1].grad) == w.alpha
    assert float(p[2].grad) == w.beta

    # and the input-level gradient is the weighted sum of part gradients
    combined = x.grad.copy()
    grads = []
    for picker in (0, 1, 2):
        xp = Tensor(base, requires_grad=True)
        backward(parts(xp)[picker])
        grads.append(xp.grad.copy())
    manual = w.adv_lambda * grads[0] + w.alpha * grads[1] + w.beta * grads[2]
    assert np.allclose(combined, manual, rtol=1e-14, atol=0.0)


def test_weights_validation():
    with pytest.raises(ConfigError):
        LossWeights(adv_lambda=-1.0)
    with pytest.raises(ConfigError):
        l_hinge(Tensor(np.zeros((1, 4))), c=-0.5)

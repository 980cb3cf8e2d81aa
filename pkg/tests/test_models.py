import numpy as np
import pytest

from geadvlab import autograd as ag
from geadvlab.autograd import Tensor
from geadvlab.errors import ConfigError, ShapeError
from geadvlab.models import (ArchDescriptor, build_classifier, build_discriminator,
                             build_generator, build_network, classifier_logits,
                             discriminator_score, forward_network, frozen,
                             generate_perturbation, predict_labels)
from geadvlab.rng import RngStream

from util import params_bytes


def test_classifier_logit_shape_28x28():
    net = build_classifier("classifier_a", (1, 28, 28), 10, seed=0)
    x = Tensor(RngStream(1).uniform((3, 1, 28, 28)))
    assert classifier_logits(net, x).shape == (3, 10)


@pytest.mark.parametrize("arch", ["classifier_a", "classifier_b", "classifier_c"])
def test_classifier_shapes_all_archs(arch):
    net = build_classifier(arch, (1, 16, 16), 7, seed=3)
    x = Tensor(RngStream(2).uniform((2, 1, 16, 16)))
    assert classifier_logits(net, x).shape == (2, 7)


def test_same_seed_bitwise_identical_params():
    a = build_classifier("classifier_b", (1, 16, 16), 10, seed=42)
    b = build_classifier("classifier_b", (1, 16, 16), 10, seed=42)
    assert params_bytes(a) == params_bytes(b)
    g1 = build_generator((1, 16, 16), 7)
    g2 = build_generator((1, 16, 16), 7)
    assert params_bytes(g1) == params_bytes(g2)


def test_different_seed_differs():
    a = build_classifier("classifier_a", (1, 16, 16), 10, seed=0)
    b = build_classifier("classifier_a", (1, 16, 16), 10, seed=1)
    assert params_bytes(a) != params_bytes(b)


def test_unknown_arch_id():
    with pytest.raises(ConfigError):
        build_classifier("resnet152", (1, 16, 16), 10, seed=0)


def test_input_shape_mismatch():
    net = build_classifier("classifier_a", (1, 16, 16), 10, seed=0)
    with pytest.raises(ShapeError):
        classifier_logits(net, Tensor(np.zeros((1, 1, 8, 8))))


def test_perturbation_hard_bound():
    g = build_generator((1, 16, 16), 0)
    # crank the weights to force saturation; the bound must still hold
    for t in g.params.values():
        t.data *= 100.0
    x = Tensor(RngStream(3).uniform((4, 1, 16, 16)))
    delta = generate_perturbation(g, x, epsilon=16.0)
    assert np.abs(delta.data).max() <= 16.0 / 255.0 + 1e-15


def test_zero_weight_generator_zero_output():
    g = build_generator((1, 16, 16), 0)
    for t in g.params.values():
        t.data[...] = 0.0
    x = Tensor(RngStream(4).uniform((2, 1, 16, 16)))
    assert np.array_equal(generate_perturbation(g, x, 16.0).data, np.zeros((2, 1, 16, 16)))


def test_fresh_generator_nonconstant_outputs():
    g = build_generator((1, 16, 16), 5)
    xs = RngStream(5).uniform((8, 1, 16, 16))
    with ag.no_grad():
        outs = generate_perturbation(g, Tensor(xs), 16.0).data
    for i in range(8):
        for j in range(i + 1, 8):
            assert not np.allclose(outs[i], outs[j])


def test_generator_requires_divisible_extent():
    with pytest.raises(ConfigError):
        build_generator((1, 15, 15), 0)


def test_discriminator_zero_weights_half_score():
    d = build_discriminator((1, 16, 16), 0)
    for t in d.params.values():
        t.data[...] = 0.0
    x = Tensor(RngStream(6).uniform((5, 1, 16, 16)))
    assert np.array_equal(discriminator_score(d, x).data, np.full(5, 0.5))


def test_discriminator_scores_in_open_unit_interval():
    d = build_discriminator((1, 16, 16), 1)
    for t in d.params.values():
        t.data *= 50.0  # push toward saturation
    x = Tensor(RngStream(7).uniform((16, 1, 16, 16)))
    s = discriminator_score(d, x).data
    assert s.shape == (16,)
    assert np.all(s > 0.0) and np.all(s < 1.0)


def test_forward_purity():
    net = build_classifier("classifier_a", (1, 16, 16), 10, seed=9)
    before = params_bytes(net)
    classifier_logits(net, Tensor(RngStream(8).uniform((4, 1, 16, 16))))
    assert params_bytes(net) == before


def test_wrong_kind_guards():
    clf = build_classifier("classifier_a", (1, 16, 16), 10, seed=0)
    gen = build_generator((1, 16, 16), 0)
    x = Tensor(np.zeros((1, 1, 16, 16)))
    with pytest.raises(ConfigError):
        generate_perturbation(clf, x, 16.0)
    with pytest.raises(ConfigError):
        discriminator_score(clf, x)
    with pytest.raises(ConfigError):
        classifier_logits(gen, x)


def test_arch_descriptor_round_trip():
    arch = build_generator((1, 16, 16), 0).arch
    again = ArchDescriptor.from_dict(arch.to_dict())
    assert again == arch
    net = build_network(again, seed=3)
    assert params_bytes(net) == params_bytes(build_generator((1, 16, 16), 3))


def test_predict_labels_batch_invariance():
    net = build_classifier("classifier_c", (1, 16, 16), 10, seed=2)
    x = RngStream(9).uniform((37, 1, 16, 16))
    assert np.array_equal(predict_labels(net, x, batch_size=8),
                          predict_labels(net, x, batch_size=64))


def test_frozen_restores_flags():
    net = build_classifier("classifier_c", (1, 16, 16), 10, seed=2)
    with frozen(net):
        assert not any(t.requires_grad for t in net.params.values())
    assert all(t.requires_grad for t in net.params.values())

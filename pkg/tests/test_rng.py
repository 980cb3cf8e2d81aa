import numpy as np
import pytest

from geadvlab.rng import RngStream


def test_same_seed_and_counter_bit_identical():
    a = RngStream(1234, counter=7).uniform((100,))
    b = RngStream(1234, counter=7).uniform((100,))
    assert np.array_equal(a, b)


def test_counter_advances_per_draw():
    s = RngStream(5)
    first = s.uniform((10,))
    second = s.uniform((10,))
    assert not np.array_equal(first, second)
    assert s.counter == 20


def test_replay_from_saved_counter():
    s = RngStream(99)
    s.uniform((13,))
    saved = s.counter
    a = s.normal((8,))
    b = RngStream(99, counter=saved).normal((8,))
    assert np.array_equal(a, b)


def test_uniform_range():
    u = RngStream(2).uniform((100_000,))
    assert u.min() >= 0.0 and u.max() < 1.0


def test_gaussian_moments_within_three_sigma():
    n = 100_000
    mu, sd = 2.0, 1.5
    z = RngStream(42).normal((n,), mu, sd)
    # 3-sigma confidence on the mean and (approximately) on the std
    assert abs(z.mean() - mu) < 3 * sd / np.sqrt(n)
    assert abs(z.std() - sd) < 3 * sd / np.sqrt(2 * n)


def test_normal_zero_std_is_exact_mean():
    z = RngStream(3).normal((50,), 1.0, 0.0)
    assert np.array_equal(z, np.ones(50))


def test_permutation_is_permutation():
    p = RngStream(7).permutation(257)
    assert np.array_equal(np.sort(p), np.arange(257))


def test_substreams_independent_of_parent_counter():
    parent = RngStream(11)
    sub_before = parent.substream(4).uniform((5,))
    parent.uniform((100,))
    sub_after = parent.substream(4).uniform((5,))
    assert np.array_equal(sub_before, sub_after)


def test_substreams_differ_by_index():
    parent = RngStream(11)
    a = parent.substream(0).uniform((5,))
    b = parent.substream(1).uniform((5,))
    assert not np.array_equal(a, b)


def test_integers_in_range():
    v = RngStream(8).integers(3, 9, (1000,))
    assert v.min() >= 3 and v.max() < 9


@pytest.mark.parametrize("shape", [(), (3,), (2, 5), (2, 3, 4)])
def test_shapes(shape):
    assert np.shape(RngStream(1).normal(shape)) == shape

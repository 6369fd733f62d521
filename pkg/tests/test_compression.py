import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sfwzoo.compression import Identity, Packet, RandK, TopK, delta_of, make_compressor, omega_of
from sfwzoo.core import ValidationError


def test_randk_example():
    pkt = RandK(4, 2).apply([1, 2, 3, 4], np.array([0, 2]))
    np.testing.assert_array_equal(pkt.values, [2, 0, 6, 0])
    assert pkt.n_coords == 2 and pkt.bits == 192


def test_randk_full_budget_is_identity():
    c = RandK(3, 3)
    assert omega_of(c) == 0.0
    np.testing.assert_array_equal(c([1.0, -2.0, 5.0], np.random.default_rng(0)).values, [1, -2, 5])


def test_randk_enumeration_x1234():
    c = RandK(4, 2)
    x = np.array([1.0, 2, 3, 4])
    outs = c.outcomes()
    assert len(outs) == 6
    mean = sum(p * c.apply(x, d).values for p, d in outs)
    var = sum(p * np.sum((c.apply(x, d).values - x) ** 2) for p, d in outs)
    np.testing.assert_allclose(mean, x, atol=1e-12)
    assert var == pytest.approx(1.0 * x @ x, rel=1e-12)


@pytest.mark.parametrize("dim,k", [(d, k) for d in range(1, 7) for k in range(1, d + 1)])
def test_randk_certificate_by_enumeration(dim, k):
    c = RandK(dim, k)
    x = np.random.default_rng(dim * 10 + k).standard_normal(dim)
    # oracle: every subset listed independently of the compressor
    subsets = list(itertools.combinations(range(dim), k))
    mean = np.zeros(dim)
    var = 0.0
    for S in subsets:
        q = c.apply(x, np.array(S)).values
        mean += q / len(subsets)
        var += np.sum((q - x) ** 2) / len(subsets)
    np.testing.assert_allclose(mean, x, atol=1e-12)
    assert var == pytest.approx(omega_of(c) * (x @ x), rel=1e-12, abs=1e-14)


def test_randk_draw_is_uniform_subset():
    c = RandK(10, 3)
    rng = np.random.default_rng(0)
    counts = np.zeros(10)
    for _ in range(5000):
        d = c.draw(rng)
        assert len(set(d.tolist())) == 3
        counts[d] += 1
    np.testing.assert_allclose(counts / 5000, 0.3, atol=0.03)


def test_topk_examples():
    np.testing.assert_array_equal(TopK(3, 1).apply([1, -3, 2]).values, [0, -3, 0])
    x = np.array([1.0, 1.0, 1.0])
    q = TopK(3, 1).apply(x).values
    np.testing.assert_array_equal(q, [1, 0, 0])
    assert np.sum((q - x) ** 2) == 2 == (1 - 1 / delta_of(TopK(3, 1))) * 3
    y = np.array([4.0, -2, 7])
    np.testing.assert_array_equal(TopK(3, 3).apply(y).values, y)


@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 1e3)), st.data())
def test_topk_contraction_property(x, data):
    k = data.draw(st.integers(1, x.size))
    c = TopK(x.size, k)
    q = c.apply(x)
    assert q.n_coords == k
    assert np.sum((q.values - x) ** 2) <= (1 - 1 / c.delta) * (x @ x) * (1 + 1e-12) + 1e-300


def test_parameters():
    assert omega_of(RandK(10, 2)) == 4
    assert delta_of(TopK(10, 2)) == 5
    assert omega_of(Identity(5)) == 0 and delta_of(Identity(5)) == 1
    with pytest.raises(ValidationError):
        TopK(10, 2).omega
    with pytest.raises(ValidationError):
        RandK(10, 2).delta


def test_bits():
    assert Identity(7).apply(np.ones(7)).bits == 7 * 64
    assert Packet.full(np.ones(3)).bits == 192
    assert TopK(9, 4).apply(np.arange(9.0)).bits == 4 * 96


def test_errors():
    for k in (0, 11):
        with pytest.raises(ValidationError):
            RandK(10, k)
    with pytest.raises(ValidationError):
        make_compressor("stochastic_rounding", 4, 1)
    with pytest.raises(ValidationError):
        TopK(3, 1).apply([1, 2])
    assert isinstance(make_compressor("topk", 4, 1), TopK)

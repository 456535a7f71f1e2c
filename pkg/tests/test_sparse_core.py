import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_online.sparse_core import (
    DenseWeights,
    SparseVector,
    dot,
    model_sparsity,
    scaled_add,
    soft_threshold,
    soft_threshold_array,
)

from oracles import prox_l1_bruteforce, prox_objective

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
lams = st.floats(0, 50, allow_nan=False)


def sv(pairs):
    return SparseVector.from_pairs(pairs)


class TestSparseVector:
    def test_drops_explicit_zeros(self):
        x = sv([(0, 1.0), (3, 0.0), (5, -2.0)])
        assert x.pairs() == [(0, 1.0), (5, -2.0)]

    @pytest.mark.parametrize("pairs", [[(2, 1.0), (1, 1.0)], [(1, 1.0), (1, 2.0)], [(-1, 1.0)]])
    def test_rejects_bad_indices(self, pairs):
        with pytest.raises(ValueError):
            sv(pairs)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            sv([(0, float("nan"))])

    def test_immutable(self):
        x = sv([(0, 1.0)])
        with pytest.raises(ValueError):
            x.values[0] = 2.0


class TestDenseWeights:
    def test_zero_extension(self):
        w = DenseWeights([1.0, 2.0])
        assert w[5] == 0.0
        assert w.gather(np.array([1, 7])).tolist() == [2.0, 0.0]

    def test_fill_value(self):
        a = DenseWeights.zeros(0, fill=1.0)
        assert a.gather(np.array([0, 100])).tolist() == [1.0, 1.0]
        a.scatter_set(np.array([3]), np.array([0.5]))
        assert a.to_array(5).tolist() == [1.0, 1.0, 1.0, 0.5, 1.0]

    def test_growth_keeps_values(self):
        w = DenseWeights()
        for i in range(100):
            w.scatter_add(np.array([i]), np.array([float(i)]))
        assert w.dim == 100
        assert w.to_array().tolist() == [float(i) for i in range(100)]


def test_dot_examples():
    assert dot(sv([(0, 2.0), (2, -1.0)]), DenseWeights([0.5, 0.0, 3.0])) == -2.0
    assert dot(SparseVector(), DenseWeights([1.0, 2.0])) == 0.0
    assert dot(sv([(5, 1.0)]), DenseWeights([1.0, 1.0, 1.0])) == 0.0


def test_scaled_add_examples():
    assert scaled_add(DenseWeights([1.0]), sv([(0, 2.0)]), 0.5) == DenseWeights([2.0])
    theta = DenseWeights([1.0, -3.0])
    assert scaled_add(theta.copy(), sv([(1, 4.0)]), 0.0) == theta
    grown = scaled_add(DenseWeights(), sv([(2, 1.0)]), 1.0)
    assert grown.to_array().tolist() == [0.0, 0.0, 1.0]


def test_scaled_add_rejects_non_finite_alpha():
    with pytest.raises(ValueError):
        scaled_add(DenseWeights(), sv([(0, 1.0)]), float("inf"))


def test_soft_threshold_examples():
    assert soft_threshold(DenseWeights([2.0, -0.5, 0.0]), 1.0) == DenseWeights([1.0, 0.0, 0.0])
    u = DenseWeights([3.0, -7.5, 0.25])
    assert soft_threshold(u, 0.0) == u
    assert soft_threshold(DenseWeights([-3.0, 4.0]), 2.5) == DenseWeights([-0.5, 1.5])


def test_soft_threshold_rejects_negative_lambda():
    with pytest.raises(ValueError):
        soft_threshold(DenseWeights([1.0]), -0.1)


def test_model_sparsity_examples():
    assert model_sparsity(DenseWeights([0.0, 0.0, 1.5]), 3) == pytest.approx(2 / 3)
    assert model_sparsity(DenseWeights([0.0] * 4), 4) == 1.0
    assert model_sparsity(DenseWeights([1.0, 1.0]), 4) == 0.5
    with pytest.raises(ValueError):
        model_sparsity(DenseWeights([1.0]), 0)


@given(st.lists(finite, min_size=1, max_size=8), lams)
def test_soft_threshold_properties(u, lam):
    u = np.array(u)
    w = soft_threshold_array(u, lam)
    assert np.all(w * u >= 0)  # never flips sign
    assert np.all(np.abs(w) <= np.abs(u))
    assert np.all(np.abs(u) - np.abs(w) <= lam + 1e-12 * np.abs(u))
    assert np.array_equal(w == 0, np.abs(u) <= lam)  # exact support rule


@given(st.lists(finite, min_size=1, max_size=8), lams, lams)
def test_monotone_sparsification(u, l1, l2):
    lo, hi = sorted((l1, l2))
    u = np.array(u)
    assert np.all((soft_threshold_array(u, hi) != 0) <= (soft_threshold_array(u, lo) != 0))


@given(st.lists(finite, min_size=1, max_size=8), lams)
def test_matches_proximal_oracle(u, lam):
    u = np.array(u)
    w = soft_threshold_array(u, lam)
    ref = prox_l1_bruteforce(u, lam)
    np.testing.assert_allclose(w, ref, atol=1e-9, rtol=0)


def test_oracle_not_beaten_on_a_grid():
    rng = np.random.default_rng(0)
    grid = np.linspace(-12, 12, 24001)
    for _ in range(20):
        u, lam = rng.normal(scale=4), rng.uniform(0, 5)
        w = soft_threshold_array(np.array([u]), lam)
        best = np.min(0.5 * (u - grid) ** 2 + lam * np.abs(grid))
        assert prox_objective(np.array([u]), w, lam) <= best + 1e-12


@settings(max_examples=300)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=8), lams)
def test_threshold_trace_inequality(pairs, lam):
    u = np.array([p[0] for p in pairs])
    z = np.array([p[1] for p in pairs])
    lhs = soft_threshold_array(u, lam) @ z
    rhs = u @ z + lam * np.abs(z).sum()
    scale = np.abs(u) @ np.abs(z) + lam * np.abs(z).sum() + 1.0
    assert lhs <= rhs + 1e-12 * scale

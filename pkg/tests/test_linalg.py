import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from biht_glm.errors import DegenerateIterate
from biht_glm.linalg import (
    GaussianDesign,
    SparseUnitVector,
    angular_distance,
    gaussian_design,
    l2_error,
    normalize,
    random_sparse_unit,
    sign_of,
    subset_threshold,
    support,
    top_k_threshold,
)

from oracles import top_k_sorted

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(1, 30), elements=finite)


class TestSign:
    def test_zero_is_positive(self):
        assert sign_of(0.0) == 1.0
        assert sign_of(-0.0) == 1.0

    def test_negative(self):
        assert sign_of(-3.5) == -1.0

    def test_tiny_positive(self):
        assert sign_of(1e-300) == 1.0

    def test_vector(self):
        np.testing.assert_array_equal(sign_of([-1.0, 0.0, 2.0]), [-1.0, 1.0, 1.0])

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            sign_of(bad)


class TestTopK:
    def test_examples(self):
        np.testing.assert_array_equal(top_k_threshold([3.0, -5.0, 1.0], 2), [3.0, -5.0, 0.0])
        np.testing.assert_array_equal(top_k_threshold([1.0, 1.0, 1.0], 1), [1.0, 0.0, 0.0])

    def test_identity_when_k_equals_d(self):
        v = np.array([0.3, -2.0, 0.0, 1.0])
        out = top_k_threshold(v, 4)
        np.testing.assert_array_equal(out, v)
        assert out is not v

    @pytest.mark.parametrize("k", [0, 4, -1])
    def test_k_out_of_range(self, k):
        with pytest.raises(ValueError):
            top_k_threshold([1.0, 2.0, 3.0], k)

    def test_ties_keep_lowest_index(self):
        np.testing.assert_array_equal(top_k_threshold([2.0, -3.0, 3.0, -2.0], 2), [0.0, -3.0, 3.0, 0.0])

    @given(vectors, st.data())
    def test_matches_sorted_oracle(self, v, data):
        k = data.draw(st.integers(1, v.size))
        out = top_k_threshold(v, k)
        np.testing.assert_array_equal(out, top_k_sorted(v, k))
        assert np.count_nonzero(out) <= k


class TestSubsetThreshold:
    def test_examples(self):
        np.testing.assert_array_equal(subset_threshold([4.0, 7.0, -2.0], [1]), [0.0, 7.0, 0.0])
        np.testing.assert_array_equal(subset_threshold([4.0, 7.0, -2.0], []), [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(subset_threshold([4.0, 7.0, -2.0], range(3)), [4.0, 7.0, -2.0])

    def test_index_out_of_bounds(self):
        with pytest.raises(IndexError):
            subset_threshold([1.0, 2.0], [2])

    @given(st.integers(1, 20), st.data())
    def test_linear(self, d, data):
        el = st.floats(-1e3, 1e3, allow_nan=False)
        u = data.draw(arrays(np.float64, d, elements=el))
        v = data.draw(arrays(np.float64, d, elements=el))
        a, b = data.draw(el), data.draw(el)
        J = data.draw(st.sets(st.integers(0, d - 1)))
        lhs = subset_threshold(a * u + b * v, J)
        rhs = a * subset_threshold(u, J) + b * subset_threshold(v, J)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(lhs).max()))


class TestNormalize:
    def test_example(self):
        np.testing.assert_allclose(normalize([3.0, 4.0]), [0.6, 0.8], rtol=1e-15)

    def test_zero_vector(self):
        with pytest.raises(DegenerateIterate):
            normalize([0.0, 0.0])

    @given(vectors)
    def test_idempotent(self, v):
        if not np.linalg.norm(v) > 0:
            return
        u = normalize(v)
        np.testing.assert_allclose(normalize(u), u, atol=1e-15)
        assert abs(np.linalg.norm(u) - 1.0) < 1e-12


class TestSparseUnitVector:
    def test_read_only_and_validated(self):
        v = SparseUnitVector(np.array([0.6, 0.0, 0.8]), 2)
        assert v.dim == 3
        np.testing.assert_array_equal(v.support, [0, 2])
        with pytest.raises(ValueError):
            v.entries[0] = 1.0

    def test_rejects_bad_norm(self):
        with pytest.raises(ValueError):
            SparseUnitVector(np.array([1.0, 1.0]), 2)

    def test_rejects_too_many_nonzeros(self):
        with pytest.raises(ValueError):
            SparseUnitVector(np.array([0.6, 0.8]), 1)


class TestRandomSparseUnit:
    def test_dense(self):
        v = random_sparse_unit(5, 5, 3)
        assert np.count_nonzero(np.asarray(v)) == 5

    @pytest.mark.parametrize("d,k", [(10, 1), (50, 5), (7, 7)])
    def test_contract(self, d, k):
        v = np.asarray(random_sparse_unit(d, k, 11))
        assert np.count_nonzero(v) == k
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-12

    def test_deterministic(self):
        np.testing.assert_array_equal(np.asarray(random_sparse_unit(30, 4, 9)),
                                      np.asarray(random_sparse_unit(30, 4, 9)))

    def test_mean_inner_product_vanishes(self):
        rng = np.random.default_rng(0)
        d, k, draws = 8, 3, 100_000
        u = np.ones(d) / np.sqrt(d)
        total = sum(float(np.dot(np.asarray(random_sparse_unit(d, k, rng)), u)) for _ in range(draws))
        assert abs(total / draws) <= 3.0 / np.sqrt(draws)

    def test_supports_uniform(self):
        rng = np.random.default_rng(1)
        counts = np.zeros(6)
        for _ in range(6000):
            counts[support(random_sparse_unit(6, 2, rng))] += 1
        # each coordinate is in the support w.p. 1/3
        np.testing.assert_allclose(counts / 6000, 1 / 3, atol=4 * np.sqrt(2 / 9 / 6000))


class TestGaussianDesign:
    def test_moments(self):
        X = np.asarray(gaussian_design(1000, 1000, 5))
        assert abs(X.mean()) < 0.01
        assert abs(X.var() - 1.0) < 0.01

    def test_reproducible(self):
        a, b = gaussian_design(20, 7, 42), gaussian_design(20, 7, 42)
        np.testing.assert_array_equal(np.asarray(a), np.asarray(b))
        assert isinstance(a, GaussianDesign) and a.shape == (20, 7)
        assert not np.array_equal(np.asarray(a), np.asarray(gaussian_design(20, 7, 43)))

    def test_read_only(self):
        with pytest.raises(ValueError):
            np.asarray(gaussian_design(3, 3, 0))[0, 0] = 1.0

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            gaussian_design(0, 3, 0)


class TestDistances:
    def test_l2(self):
        u, v = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert l2_error(u, u) == 0.0
        assert l2_error(u, -u) == 2.0
        assert l2_error(u, v) == pytest.approx(np.sqrt(2), rel=1e-15)

    def test_angular(self):
        u, v = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert angular_distance(u, u) == 0.0
        assert angular_distance(u, v) == pytest.approx(np.pi / 2, rel=1e-15)
        assert angular_distance(u, -u) == pytest.approx(np.pi, rel=1e-15)

    def test_angular_matches_arccos_away_from_poles(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            u, v = (normalize(rng.standard_normal(6)) for _ in range(2))
            assert angular_distance(u, v) == pytest.approx(np.arccos(np.dot(u, v)), abs=1e-12)

    @settings(max_examples=300)
    @given(st.integers(2, 10), st.floats(-9, 1), st.integers(0, 2**32 - 1))
    def test_sandwich(self, d, log_scale, seed):
        rng = np.random.default_rng(seed)
        u = normalize(rng.standard_normal(d))
        v = normalize(u + 10.0**log_scale * rng.standard_normal(d))
        dist, ang = l2_error(u, v), angular_distance(u, v)
        assert dist <= ang + 1e-10
        assert ang <= np.pi / 2 * dist + 1e-10

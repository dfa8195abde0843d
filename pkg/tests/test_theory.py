import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biht_glm.errors import DegenerateDirection, DegenerateIterate, InvalidParams
from biht_glm.glm import LinkModel, sample_responses
from biht_glm.linalg import normalize, random_sparse_unit, sign_of, support
from biht_glm.theory import (
    RecurrenceParams,
    check_factor3_lemma,
    check_recurrence,
    decompose_deviation,
    expectation_checks,
    g_fn,
    gf_fn,
    h_fn,
    h_fn_restricted,
    hf_fn,
    hf_fn_restricted,
    mismatch_count,
    mismatch_law,
    normalized_distance_gap,
    raic_delta,
    raic_probe,
    raic_sample,
    recurrence_f1,
    recurrence_f2,
    sample_complexity_regime,
    theorem_recurrence_params,
    theoretical_error_curve,
)

import oracles

SCALE = math.sqrt(2 * math.pi)


def _setup(n=200, d=20, k=3, seed=0, model=None):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    ts = np.asarray(random_sparse_unit(d, k, rng))
    tp = np.asarray(random_sparse_unit(d, k, rng))
    y = sample_responses(model or LinkModel.sign(), X @ ts, rng)
    return rng, X, ts, tp, y


class TestHMaps:
    def test_h_self_is_zero(self):
        _, X, ts, _, _ = _setup()
        np.testing.assert_array_equal(h_fn(X, ts, ts), 0.0)
        np.testing.assert_array_equal(h_fn_restricted(X, ts, ts, [0, 1]), 0.0)

    def test_h_antipodal(self):
        _, X, ts, _, _ = _setup()
        np.testing.assert_allclose(h_fn(X, ts, -ts), SCALE / X.shape[0] * X.T @ sign_of(X @ ts), atol=1e-13)

    def test_h_matches_definition(self):
        _, X, ts, tp, _ = _setup()
        ref = SCALE / X.shape[0] * X.T @ (0.5 * (sign_of(X @ ts) - sign_of(X @ tp)))
        np.testing.assert_allclose(h_fn(X, ts, tp), ref, atol=1e-13)

    def test_restricted_support_and_full_index(self):
        rng, X, ts, tp, _ = _setup()
        J = rng.choice(20, 3, replace=False)
        out = h_fn_restricted(X, ts, tp, J)
        assert set(support(out)) <= set(support(ts)) | set(support(tp)) | set(J)
        np.testing.assert_array_equal(h_fn_restricted(X, ts, tp, range(20)), h_fn(X, ts, tp))

    def test_hf_sign_model_equals_h(self):
        _, X, ts, tp, y = _setup()
        np.testing.assert_array_equal(hf_fn(X, y, tp), h_fn(X, ts, tp))
        np.testing.assert_array_equal(hf_fn_restricted(X, y, ts, tp, [4]), h_fn_restricted(X, ts, tp, [4]))

    def test_hf_matches_definition(self):
        _, X, ts, tp, y = _setup(model=LinkModel.logistic(1.0))
        ref = SCALE / X.shape[0] * X.T @ (0.5 * (y - sign_of(X @ tp)))
        np.testing.assert_allclose(hf_fn(X, y, tp), ref, atol=1e-13)

    @pytest.mark.parametrize("seed", range(5))
    def test_g_orthogonal(self, seed):
        rng, X, ts, tp, y = _setup(seed=seed)
        J = rng.choice(20, 2, replace=False)
        for g in (g_fn(X, ts, tp), g_fn(X, ts, tp, J)):
            assert abs(np.dot(g, ts - tp)) <= 1e-10
            assert abs(np.dot(g, ts + tp)) <= 1e-10
        for gf in (gf_fn(X, y, ts), gf_fn(X, y, ts, J)):
            assert abs(np.dot(gf, ts)) <= 1e-10

    def test_g_degenerate(self):
        _, X, ts, _, _ = _setup()
        with pytest.raises(DegenerateDirection):
            g_fn(X, ts, ts)
        with pytest.raises(DegenerateDirection):
            g_fn(X, ts, -ts)

    @pytest.mark.parametrize("seed", range(10))
    def test_additivity(self, seed):
        rng, X, u, _, _ = _setup(seed=seed)
        v = np.asarray(random_sparse_unit(20, 3, rng))
        J = np.union1d(rng.choice(20, 2, replace=False), support(v))
        w = np.zeros(20)
        w[J] = rng.standard_normal(J.size)
        w /= np.linalg.norm(w)
        lhs = h_fn_restricted(X, u, v, J)
        rhs = h_fn_restricted(X, u, w, J) + h_fn_restricted(X, w, v, np.union1d(support(u), J))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_hf_decomposition(self, seed):
        rng, X, u, v, y = _setup(seed=seed, model=LinkModel.probit(1.0))
        J = rng.choice(20, 3, replace=False)
        lhs = hf_fn_restricted(X, y, u, v, J)
        rhs = h_fn_restricted(X, u, v, J) + hf_fn_restricted(X, y, u, u, np.union1d(support(v), J))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestRecurrence:
    def test_f1_start(self):
        assert recurrence_f1(RecurrenceParams.from_vw(0.1, 1.0), 0) == 2.0

    def test_f2_start(self):
        assert recurrence_f2(RecurrenceParams.from_vw(0.1, 1.0), 0) == pytest.approx(2.0, rel=1e-15)

    def test_limit(self):
        p = RecurrenceParams.from_vw(0.2, 0.5)
        assert abs(recurrence_f2(p, 50) - p.limit) <= 1e-10
        assert abs(recurrence_f1(p, 50) - p.limit) <= 1e-10

    def test_theorem_instance(self):
        for eps in (0.05, 0.25, 0.9):
            p = theorem_recurrence_params(eps)
            assert p.u == pytest.approx(0.5 * (1 + math.sqrt(7 / 3)), rel=1e-15)
            assert p.limit == pytest.approx(eps, rel=1e-14)
            for t in range(8):
                assert recurrence_f2(p, t) == pytest.approx(oracles.theory_curve(eps, t), rel=1e-13)

    def test_invalid(self):
        with pytest.raises(InvalidParams):
            RecurrenceParams(1.5, 0.1, 1.0)
        with pytest.raises(InvalidParams):
            RecurrenceParams.from_vw(1.9, 1.0)  # u > sqrt(2/v)
        with pytest.raises(InvalidParams):
            RecurrenceParams.from_vw(0.1, 0.0)

    def test_boundary_is_constant(self):
        # v = 2/u^2 makes f1 and f2 both constant at 2
        w = 1.0
        u = 0.5 * (1 + math.sqrt(5))
        p = RecurrenceParams(u, 2.0 / u**2, w)
        assert recurrence_f1(p, 10) == pytest.approx(2.0, rel=1e-14)
        assert recurrence_f2(p, 10) == pytest.approx(2.0, rel=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.01, 10.0), st.floats(0.001, 0.999))
    def test_fact(self, w, frac):
        u = 0.5 * (1 + math.sqrt(1 + 4 * w))
        r = check_recurrence(RecurrenceParams(u, frac * 2 / u**2, w))
        assert r.ok, r

    def test_f1_strictly_decreasing_early(self):
        p = RecurrenceParams.from_vw(0.05, 2.0)
        vals = [recurrence_f1(p, t) for t in range(10)]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestErrorCurve:
    def test_values(self):
        assert theoretical_error_curve(0.25, 0) == 2.0
        assert theoretical_error_curve(0.25, 1) == pytest.approx(math.sqrt(0.5), rel=1e-15)
        assert abs(theoretical_error_curve(0.25, 60) - 0.25) <= 1e-12

    def test_vectorized(self):
        t = np.arange(31)
        np.testing.assert_allclose(theoretical_error_curve(0.1, t), [oracles.theory_curve(0.1, s) for s in t],
                                   rtol=1e-14)

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            theoretical_error_curve(1.0, 3)


class TestRegimes:
    def test_low(self):
        r = sample_complexity_regime("logistic", 0.1, 0.2, 1000, 10)
        assert r["regime"] == "low-SNR" and r["calibrated"] is False
        assert r["leading_term"] == pytest.approx(10 * math.log(100) / (0.01 * 0.04), rel=1e-14)

    def test_epsilon_halved_quadruples(self):
        a = sample_complexity_regime("probit", 0.5, 0.2, 1000, 10)["leading_term"]
        b = sample_complexity_regime("probit", 0.5, 0.1, 1000, 10)["leading_term"]
        assert b == pytest.approx(4 * a, rel=1e-14)

    @pytest.mark.parametrize("family,b2", [("logistic", 3 / math.sqrt(2 * math.pi) * (5 + math.sqrt(21))),
                                           ("probit", 1.5 * (5 + math.sqrt(21)))])
    def test_high(self, family, b2):
        eps = 0.2
        r = sample_complexity_regime(family, b2 / eps, eps, 1000, 10)
        assert r["regime"] == "high-SNR"
        assert r["leading_term"] == pytest.approx(10 * math.log(100) / eps, rel=1e-14)
        r = sample_complexity_regime(family, 0.999 * b2 / eps, eps, 1000, 10)
        assert r["regime"] == "moderate-SNR"

    def test_dense_nonzero(self):
        assert sample_complexity_regime("logistic", 2.0, 0.5, 10, 10)["leading_term"] > 0

    def test_bad_family(self):
        with pytest.raises(ValueError):
            sample_complexity_regime("sign", 1.0, 0.1, 10, 2)


class TestMismatch:
    def test_basic(self):
        _, X, ts, _, _ = _setup()
        assert mismatch_count(X, ts, ts) == 0
        assert mismatch_count(X, ts, -ts) == X.shape[0]

    def test_orthogonal_mean(self):
        r = mismatch_law(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), n=100, replicates=2000, seed=4)
        assert r.expected_mean == pytest.approx(50.0)
        assert r.mean_ok


class TestFactor3:
    def test_identical_projections(self):
        u = normalize(np.array([3.0, 0.0, 1.0, 0.0]))
        v = np.array([2.5, 0.1, 1.5, -0.05])
        r = check_factor3_lemma(u, v, [0], 2)
        assert r.lhs == pytest.approx(r.rhs / 3, rel=1e-15)

    def test_exact_projection(self):
        v = np.array([0.2, -3.0, 1.0, 0.5])
        u = normalize(np.array([0.0, -3.0, 1.0, 0.0]))
        r = check_factor3_lemma(u, v, [], 2)
        assert r.lhs <= 1e-15 and r.ok

    def test_zero_thresholded(self):
        with pytest.raises(DegenerateIterate):
            check_factor3_lemma(np.array([1.0, 0.0]), np.zeros(2), [], 1)

    @settings(max_examples=300)
    @given(st.integers(0, 2**32 - 1))
    def test_random(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 30))
        k = int(rng.integers(1, d + 1))
        u = np.asarray(random_sparse_unit(d, k, rng))
        v = u + 10.0 ** rng.uniform(-2, 1) * rng.standard_normal(d)
        J = rng.choice(d, size=int(rng.integers(0, k + 1)), replace=False)
        assert check_factor3_lemma(u, v, J, k).ok


class TestNormalizedDistance:
    @settings(max_examples=300)
    @given(st.integers(0, 2**32 - 1))
    def test_bound(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 10))
        u = rng.standard_normal(d) * 10.0 ** rng.uniform(-3, 3)
        v = u + rng.standard_normal(d) * 10.0 ** rng.uniform(-6, 2)
        if np.linalg.norm(v) == 0:
            return
        assert normalized_distance_gap(u, v) >= -1e-10

    def test_zero(self):
        with pytest.raises(DegenerateIterate):
            normalized_distance_gap(np.zeros(2), np.ones(2))


def _conforming(rng, d, k):
    tp = np.asarray(random_sparse_unit(d, k, rng))
    J = np.sort(rng.choice(d, k, replace=False))
    tdd = np.zeros(d)
    idx = np.union1d(np.setdiff1d(support(tp), J), J[: rng.integers(0, k + 1)])
    tdd[idx] = rng.standard_normal(idx.size)
    return tp, normalize(tdd), J


class TestDecomposition:
    def test_theta_dd_equals_theta_prime(self):
        rng, X, ts, tp, y = _setup(n=500, d=30, k=3, seed=3)
        J = rng.choice(30, 3, replace=False)
        r = decompose_deviation(X, y, ts, tp, tp, J, LinkModel.sign())
        assert r.term2 == 0.0 and r.ok

    @pytest.mark.parametrize("seed", range(30))
    def test_bound_holds(self, seed):
        rng = np.random.default_rng(seed)
        d, k, n = 50, 5, 2000
        m = LinkModel.logistic(1.0)
        X = rng.standard_normal((n, d))
        ts = np.asarray(random_sparse_unit(d, k, rng))
        tp, tdd, J = _conforming(rng, d, k)
        r = decompose_deviation(X, sample_responses(m, X @ ts, rng), ts, tp, tdd, J, m)
        assert r.ok and r.total <= 2.0

    def test_gamma_zero(self):
        rng, X, ts, tp, y = _setup()
        with pytest.raises(DegenerateIterate):
            decompose_deviation(X, y, ts, tp, tp, [], LinkModel.logistic(0.0))

    def test_support_condition(self):
        rng, X, ts, tp, y = _setup()
        other = np.asarray(random_sparse_unit(20, 3, 99))
        with pytest.raises(ValueError):
            decompose_deviation(X, y, ts, tp, other, [], LinkModel.sign())


class TestExpectations:
    @pytest.mark.slow
    @pytest.mark.parametrize("model", [LinkModel.sign(), LinkModel.logistic(2.0), LinkModel.probit(0.5)])
    def test_small_scale(self, model):
        for c in expectation_checks(model, d=20, k=3, n=300, replicates=600, seed=11):
            assert c.ok, (c.name, c.worst_z)

    def test_sign_inner_product_is_exact(self):
        checks = expectation_checks(LinkModel.sign(), d=10, k=2, n=50, replicates=20, seed=0)
        assert checks[1].worst_z == 0.0


class TestRaic:
    def test_noiseless_truth_has_zero_lhs(self):
        rng, X, ts, _, y = _setup(n=2000, d=50)
        s = raic_sample(X, y, ts, ts, support(ts), raic_delta(0.3))
        assert s.lhs == 0.0 and s.rhs == pytest.approx(raic_delta(0.3)) and not s.violated

    @pytest.mark.parametrize("seed", range(20))
    def test_truth_concentrates_noisy(self, seed):
        rng, X, ts, _, y = _setup(n=20000, d=50, seed=seed, model=LinkModel.logistic(5.0))
        s = raic_sample(X, y, ts, ts, support(ts), raic_delta(0.3))
        assert not s.violated

    def test_undersampled_detects(self):
        r = raic_probe(LinkModel.sign(), None, 200, 3, 5, 0.3, 150, 3)
        assert r.violation_fraction > 0.3
        assert set(r.by_stratum()) == {"near", "random", "flipped"}

    def test_well_sampled(self):
        r = raic_probe(LinkModel.sign(), None, 100, 2, 8000, 0.3, 90, 4)
        assert r.violation_fraction <= 0.05
        assert all(s.lhs >= 0 and s.rhs > 0 for s in r.samples)

    def test_deterministic(self):
        a = raic_probe(LinkModel.probit(2.0), None, 40, 2, 300, 0.3, 30, 5)
        b = raic_probe(LinkModel.probit(2.0), None, 40, 2, 300, 0.3, 30, 5)
        assert [s.lhs for s in a.samples] == [s.lhs for s in b.samples]

    def test_bad_args(self):
        with pytest.raises(ValueError):
            raic_probe(LinkModel.sign(), None, 10, 2, 0, 0.3, 5)

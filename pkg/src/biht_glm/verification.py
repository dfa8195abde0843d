"""Property suites run by ``biht-glm verify``.

Each suite returns a list of :class:`CheckResult`; a suite passes when all
of its checks do.
"""
from dataclasses import dataclass

import numpy as np

from .glm import (
    SQRT_2_OVER_PI,
    LinkModel,
    alpha,
    alpha_monte_carlo,
    check_assumption,
    gamma,
    gamma_stein,
    logistic_bounds,
    sample_responses,
)
from .linalg import random_sparse_unit, support
from .rng import stream
from .theory import (
    RecurrenceParams,
    angular_fact_gaps,
    check_factor3_lemma,
    check_recurrence,
    decompose_deviation,
    expectation_checks,
    h_fn_restricted,
    hf_fn_restricted,
    mismatch_law,
    normalized_distance_gap,
    raic_probe,
)

__all__ = ["CheckResult", "SUITES", "run_suite", "random_unit_pairs", "random_recurrence_params"]

BETA_GRID = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
PROBIT_GRID = (0.1, 0.5, 1.0, 2.0, 5.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ok", bool(self.ok))


def random_unit_pairs(count, rng, max_dim=20):
    """Pairs of unit vectors in random dimensions, biased toward near pairs."""
    for i in range(count):
        d = int(rng.integers(2, max_dim + 1))
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        scale = 10.0 ** rng.uniform(-6, 1) if i % 2 else 10.0
        v = u + scale * rng.standard_normal(d)
        yield u, v / np.linalg.norm(v)


def random_recurrence_params(count, rng):
    """Valid parameters with ``v`` strictly inside ``(0, 2/u^2)``."""
    out = []
    for _ in range(count):
        w = float(rng.uniform(0.01, 10.0))
        u = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * w))
        v = float(rng.uniform(0.001, 0.999)) * 2.0 / u**2
        out.append(RecurrenceParams(u, v, w))
    return out


def _conforming_pair(d, k, rng):
    # theta'' and J with Supp(theta'') | J == Supp(theta') | J
    tp = np.asarray(random_sparse_unit(d, k, rng))
    J = np.sort(rng.choice(d, size=int(rng.integers(0, k + 1)), replace=False))
    need = np.setdiff1d(support(tp), J)
    extra = rng.choice(J, size=int(rng.integers(0, J.size + 1)), replace=False) if J.size else J
    tdd = np.zeros(d)
    idx = np.concatenate([need, extra]).astype(int)
    tdd[idx] = rng.standard_normal(idx.size)
    if not np.any(tdd):
        tdd = tp.copy()
    return tp, tdd / np.linalg.norm(tdd), J


def facts_suite(seed=0, instances=10_000):
    rng = stream(seed)
    results = []

    worst = min(normalized_distance_gap(u, 10.0 ** rng.uniform(-3, 3) * v)
                for u, v in random_unit_pairs(instances, rng))
    results.append(CheckResult("normalized-distance bound", worst >= -1e-10, f"min slack {worst:.3e}"))

    gaps = np.array([angular_fact_gaps(u, v) for u, v in random_unit_pairs(instances, rng)])
    worst = float(gaps.min())
    results.append(CheckResult("euclidean/angular sandwich", worst >= -1e-10, f"min slack {worst:.3e}"))

    bad = 0
    for _ in range(instances):
        d = int(rng.integers(2, 40))
        k = int(rng.integers(1, d + 1))
        u = np.asarray(random_sparse_unit(d, k, rng))
        v = u + 10.0 ** rng.uniform(-2, 1) * rng.standard_normal(d)
        J = rng.choice(d, size=int(rng.integers(0, k + 1)), replace=False)
        bad += not check_factor3_lemma(u, v, J, k).ok
    results.append(CheckResult("factor-3 thresholding lemma", bad == 0, f"{bad} violations / {instances}"))

    reports = [check_recurrence(p) for p in random_recurrence_params(100, rng)]
    bad = sum(not r.ok for r in reports)
    results.append(CheckResult("recurrence f1 <= f2, decay, limit", bad == 0, f"{bad} failures / 100"))

    worst_add, worst_dec = 0.0, 0.0
    for _ in range(200):
        d, k, n = 30, 4, 300
        X = rng.standard_normal((n, d))
        u = np.asarray(random_sparse_unit(d, k, rng))
        w, v, J = _conforming_pair(d, k, rng)
        lhs = h_fn_restricted(X, u, v, J)
        rhs = h_fn_restricted(X, u, w, J) + h_fn_restricted(X, w, v, np.union1d(support(u), J))
        worst_add = max(worst_add, float(np.abs(lhs - rhs).max()))
        y = sample_responses(LinkModel.logistic(1.0), X @ u, rng)
        lhs = hf_fn_restricted(X, y, u, v, J)
        rhs = h_fn_restricted(X, u, v, J) + hf_fn_restricted(X, y, u, u, np.union1d(support(v), J))
        worst_dec = max(worst_dec, float(np.abs(lhs - rhs).max()))
    results.append(CheckResult("h additivity", worst_add <= 1e-12, f"max abs gap {worst_add:.1e}"))
    results.append(CheckResult("hf decomposition", worst_dec <= 1e-12, f"max abs gap {worst_dec:.1e}"))
    return results


def glm_suite(seed=0, mc_draws=1_000_000):
    results = []
    worst = 0.0
    for b in PROBIT_GRID:
        m = LinkModel.probit(b)
        worst = max(worst, abs(alpha(m, "quadrature").alpha - alpha(m, "closed_form").alpha),
                    abs(gamma(m, "quadrature").gamma - gamma(m, "closed_form").gamma))
    results.append(CheckResult("probit closed form vs quadrature", worst <= 1e-10, f"max gap {worst:.1e}"))

    worst = 0.0
    for b in BETA_GRID:
        for m in (LinkModel.logistic(b), LinkModel.probit(b)):
            worst = max(worst, abs(gamma(m).gamma - gamma_stein(m)))
    results.append(CheckResult("gamma vs Stein identity", worst <= 1e-6, f"max gap {worst:.1e}"))

    worst_z = 0.0
    for i, b in enumerate(BETA_GRID):
        for j, m in enumerate((LinkModel.logistic(b), LinkModel.probit(b))):
            mc = alpha_monte_carlo(m, mc_draws, stream(seed, i, j))
            worst_z = max(worst_z, abs(mc.alpha - alpha(m).alpha) / mc.std_error)
    results.append(CheckResult("alpha vs Monte Carlo (3 s.e.)", worst_z <= 3.0, f"max |z| {worst_z:.2f}"))

    ok = True
    for b in BETA_GRID:
        a_up, g_lo = logistic_bounds(b)
        q = LinkModel.logistic(b)
        ok &= alpha(q).alpha <= a_up and gamma(q).gamma >= g_lo
        ok &= gamma(q).gamma >= SQRT_2_OVER_PI * (1.0 - 2.0 * alpha(q).alpha) - 1e-12
    results.append(CheckResult("logistic alpha/gamma bounds", bool(ok)))

    reports = [check_assumption(LinkModel.logistic(1.0)), check_assumption(LinkModel.probit(1.0))]
    ok = all(r.monotone_ok and r.ratio_ok for r in reports)
    results.append(CheckResult("link conditions (logistic, probit)", ok))
    return results


def theory_suite(seed=0):
    results = []
    for m in (LinkModel.sign(), LinkModel.logistic(1.0), LinkModel.probit(1.0)):
        for c in expectation_checks(m, seed=seed):
            results.append(CheckResult(f"{m.label}: {c.name}", c.ok, f"max |z| {c.worst_z:.2f}"))
    for ang in (np.pi / 6, np.pi / 2, 5 * np.pi / 6):
        u = np.array([1.0, 0.0])
        v = np.array([np.cos(ang), np.sin(ang)])
        r = mismatch_law(u, v, seed=seed)
        results.append(CheckResult(
            f"mismatch law at angle {ang:.4f}", r.ok,
            f"mean {r.mean:.2f} vs {r.expected_mean:.2f}, var {r.variance:.2f} vs {r.expected_variance:.2f}"))

    rng = stream(seed, 99)
    m = LinkModel.logistic(1.0)
    bad = 0
    for _ in range(1000):
        d, k, n = 50, 5, 2000
        X = rng.standard_normal((n, d))
        ts = np.asarray(random_sparse_unit(d, k, rng))
        tp, tdd, J = _conforming_pair(d, k, rng)
        y = sample_responses(m, X @ ts, rng)
        bad += not decompose_deviation(X, y, ts, tp, tdd, J, m).ok
    results.append(CheckResult("three-term deviation bound", bad == 0, f"{bad} violations / 1000"))
    return results


RAIC_N_GRID = (5, 200, 2000, 20000)


def raic_suite(seed=0, d=200, k=3, epsilon=0.3, num_probes=500):
    results = []
    for n in RAIC_N_GRID:
        r = raic_probe(LinkModel.sign(), None, d, k, n, epsilon, num_probes, stream(seed, n))
        frac = r.violation_fraction
        if n == RAIC_N_GRID[0]:
            results.append(CheckResult(f"n={n}: probe detects undersampling", frac > 0.05,
                                       f"violation_fraction {frac:.3f}"))
        elif n == RAIC_N_GRID[-1]:
            results.append(CheckResult(f"n={n}: violation fraction <= 0.05", frac <= 0.05,
                                       f"violation_fraction {frac:.3f}"))
        else:
            results.append(CheckResult(f"n={n}: (informational)", True, f"violation_fraction {frac:.3f}"))
    return results


SUITES = {
    "facts": facts_suite,
    "glm": glm_suite,
    "theory": theory_suite,
    "raic": raic_suite,
}


def run_suite(name, seed=0):
    """Run one named suite, or all of them for ``name='all'``."""
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](seed)]
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name](seed)

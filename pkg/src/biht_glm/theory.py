"""Analytical objects behind the BIHT error analysis and their numerical checks.

The maps below are all scaled by ``sqrt(2 pi) / n``::

    h(u, v)    = c X^T (sign(Xu) - sign(Xv)) / 2
    hf(u, v)   = c X^T (y - sign(Xv)) / 2,        y = f(X theta*)
    h_J(u, v)  = h(u, v) restricted to Supp(u) | Supp(v) | J

``g`` and ``gf`` remove from ``h`` and ``hf`` their components along the
directions whose expectation they carry, leaving zero-mean residuals.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import DegenerateDirection, DegenerateIterate, InvalidParams
from .glm import DELTA_SCALE, gamma, sample_responses
from .linalg import (
    angular_distance,
    gaussian_design,
    normalize,
    random_sparse_unit,
    sign_of,
    subset_threshold,
    support,
    top_k_threshold,
)
from .rng import DESIGN, PROBE, RESPONSES, THETA_STAR, as_generator, derive_seed, stream

__all__ = [
    "RecurrenceParams",
    "RecurrenceReport",
    "RaicSample",
    "RaicProbeResult",
    "Factor3Result",
    "DeviationDecomposition",
    "ExpectationCheck",
    "MismatchLawReport",
    "h_fn",
    "h_fn_restricted",
    "hf_fn",
    "hf_fn_restricted",
    "g_fn",
    "gf_fn",
    "recurrence_f1",
    "recurrence_f2",
    "check_recurrence",
    "theorem_recurrence_params",
    "theoretical_error_curve",
    "sample_complexity_regime",
    "mismatch_count",
    "mismatch_law",
    "normalized_distance_gap",
    "angular_fact_gaps",
    "check_factor3_lemma",
    "decompose_deviation",
    "expectation_checks",
    "raic_delta",
    "raic_sample",
    "raic_probe",
]

_SCALE = np.sqrt(2.0 * np.pi)
_HALF_PI_SQRT = np.sqrt(np.pi / 2.0)


def _union(*parts):
    return np.unique(np.concatenate([np.asarray(p, dtype=np.intp).ravel() for p in parts]))


def _backproject(X, r_rows, rows):
    n = X.shape[0]
    return (_SCALE / n) * (X[rows].T @ r_rows)


# ---------------------------------------------------------------- h maps


def h_fn(X, u, v):
    """``h(u, v) = (sqrt(2 pi)/n) X^T (sign(Xu) - sign(Xv)) / 2``."""
    X = np.asarray(X, dtype=float)
    su = sign_of(X @ np.asarray(u, dtype=float))
    sv = sign_of(X @ np.asarray(v, dtype=float))
    rows = np.flatnonzero(su != sv)
    return _backproject(X, su[rows], rows)


def h_fn_restricted(X, u, v, J=()):
    """``h(u, v)`` restricted to ``Supp(u) | Supp(v) | J``."""
    return subset_threshold(h_fn(X, u, v), _union(support(u), support(v), J))


def hf_fn(X, y, v):
    """``(sqrt(2 pi)/n) X^T (y - sign(Xv)) / 2`` for realized responses ``y``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    sv = sign_of(X @ np.asarray(v, dtype=float))
    rows = np.flatnonzero(y != sv)
    return _backproject(X, y[rows], rows)


def hf_fn_restricted(X, y, u, v, J=()):
    """:func:`hf_fn` restricted to ``Supp(u) | Supp(v) | J``.

    ``u`` is the parameter that generated ``y``; it only contributes its
    support.
    """
    return subset_threshold(hf_fn(X, y, v), _union(support(u), support(v), J))


def g_fn(X, u, v, J=None):
    """Residual of ``h(u, v)`` (or ``h_J``) after removing its components
    along ``(u - v)/||u - v||`` and ``(u + v)/||u + v||``.

    Raises
    ------
    DegenerateDirection
        If ``u = v`` or ``u = -v``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    a, b = u - v, u + v
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateDirection("g is undefined for u = +/- v")
    h = h_fn(X, u, v) if J is None else h_fn_restricted(X, u, v, J)
    # orthonormal basis of span{a, b}; a and b are orthogonal for unit u, v
    q, _ = np.linalg.qr(np.column_stack([a / na, b / nb]))
    return h - q @ (q.T @ h)


def gf_fn(X, y, u, J=None):
    """Residual of ``hf(u, u)`` (or its restriction) after removing the
    component along the unit vector ``u``."""
    u = np.asarray(u, dtype=float)
    hf = hf_fn(X, y, u) if J is None else hf_fn_restricted(X, y, u, u, J)
    return hf - np.dot(hf, u) * u


# ------------------------------------------------------------ recurrence


@dataclass(frozen=True)
class RecurrenceParams:
    """Parameters ``(u, v, w)`` of the two-sequence recurrence.

    Requires ``u = (1 + sqrt(1 + 4w)) / 2`` and ``1 <= u <= sqrt(2/v)``.
    """

    u: float
    v: float
    w: float

    def __post_init__(self):
        if not (self.v > 0 and self.w > 0):
            raise InvalidParams("v and w must be positive")
        if abs(self.u - 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * self.w))) > 1e-12:
            raise InvalidParams("u must equal (1 + sqrt(1 + 4w)) / 2")
        if not 1.0 <= self.u <= np.sqrt(2.0 / self.v) * (1.0 + 1e-12):
            raise InvalidParams("u must satisfy 1 <= u <= sqrt(2/v)")

    @classmethod
    def from_vw(cls, v, w):
        return cls(0.5 * (1.0 + np.sqrt(1.0 + 4.0 * w)), v, w)

    @property
    def limit(self):
        """Common limit ``u^2 v`` of both sequences."""
        return self.u**2 * self.v


def recurrence_f1(params, t):
    """``f1(0) = 2``, ``f1(t) = sqrt(v f1(t-1)) + v w``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    f = 2.0
    for _ in range(int(t)):
        f = np.sqrt(params.v * f) + params.v * params.w
    return float(f)


def _log_interp(log_a, log_b, t):
    # 2^{-t} log_a + (1 - 2^{-t}) log_b, exact at t = 0 and stable for large t
    s = np.exp2(-np.asarray(t, dtype=float))
    return s * log_a + (1.0 - s) * log_b


def recurrence_f2(params, t):
    """``f2(t) = 2^(2^-t) (u^2 v)^(1 - 2^-t)``, evaluated in log space."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    out = np.exp(_log_interp(np.log(2.0), np.log(params.limit), t))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RecurrenceReport:
    """Outcome of :func:`check_recurrence` on ``t = 0..t_max``."""

    params: RecurrenceParams
    f1_le_f2: bool
    f1_decreasing: bool
    f2_decreasing: bool
    f1_limit_gap: float
    f2_limit_gap: float
    ok: bool


def check_recurrence(params, t_max=50, tol=1e-10):
    """Check ``f1 <= f2``, monotone decay and the common limit ``u^2 v``.

    Comparisons are made between logarithms with absolute tolerance
    ``tol``; once both sequences reach their limit in floating point,
    consecutive values are allowed to tie within ``tol``.
    """
    ts = np.arange(t_max + 1)
    log_f1 = np.log([recurrence_f1(params, t) for t in ts])
    log_f2 = _log_interp(np.log(2.0), np.log(params.limit), ts)
    log_lim = np.log(params.limit)
    f1_le_f2 = bool(np.all(log_f1 <= log_f2 + tol))
    f1_dec = bool(np.all(np.diff(log_f1) <= tol))
    f2_dec = bool(np.all(np.diff(log_f2) <= tol))
    gap1 = float(abs(log_f1[-1] - log_lim))
    gap2 = float(abs(log_f2[-1] - log_lim))
    ok = f1_le_f2 and f1_dec and f2_dec and gap1 <= tol and gap2 <= tol
    return RecurrenceReport(params, f1_le_f2, f1_dec, f2_dec, gap1, gap2, ok)


def theorem_recurrence_params(epsilon):
    """Instance ``u = (1 + sqrt(7/3))/2, v = 9 delta, w = 1/3`` whose limit
    ``u^2 v`` equals ``epsilon``."""
    return RecurrenceParams.from_vw(9.0 * raic_delta(epsilon), 1.0 / 3.0)


def theoretical_error_curve(epsilon, t):
    """Error bound ``2^(2^-t) epsilon^(1 - 2^-t)`` after ``t`` iterations."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    out = np.exp(_log_interp(np.log(2.0), np.log(epsilon), t))
    return float(out) if out.ndim == 0 else out


def raic_delta(epsilon):
    """Radius ``delta = epsilon / ((3/2)(5 + sqrt(21)))``."""
    return epsilon / DELTA_SCALE


# ------------------------------------------------------- sample complexity

# lower breakpoint of the moderate band; only constrained to be >= 1 for the
# logistic link, fixed at 1 for probit
_LOW_BREAK = {"logistic": 1.0, "probit": 1.0}
_HIGH_BREAK = {
    "logistic": 3.0 / np.sqrt(2.0 * np.pi) * (5.0 + np.sqrt(21.0)),
    "probit": DELTA_SCALE,
}


def sample_complexity_regime(model_family, beta, epsilon, d, k):
    """Order-wise sample size for the logistic or probit link.

    Returns a dict with the regime label (``low-SNR``, ``moderate-SNR`` or
    ``high-SNR``), the leading term ``k log(d/k)`` divided by the regime's
    factor (``beta^2 eps^2``, ``beta eps^2`` or ``eps``), and the
    breakpoints used.  Constants are set to one, so only ratios between
    leading terms are meaningful; the log factor is floored at one so the
    dense case ``k = d`` stays positive.
    """
    if model_family not in _HIGH_BREAK:
        raise ValueError("model_family must be 'logistic' or 'probit'")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 1 <= k <= d:
        raise ValueError("need 1 <= k <= d")
    low = _LOW_BREAK[model_family]
    high = _HIGH_BREAK[model_family] / epsilon
    base = k * max(np.log(d / k), 1.0)
    if beta < low:
        label, term = "low-SNR", base / (beta**2 * epsilon**2)
    elif beta < high:
        label, term = "moderate-SNR", base / (beta * epsilon**2)
    else:
        label, term = "high-SNR", base / epsilon
    return {
        "regime": label,
        "leading_term": float(term),
        "low_breakpoint": low,
        "high_breakpoint": float(high),
        "calibrated": False,
    }


# ------------------------------------------------------ deterministic facts


def mismatch_count(X, u, v):
    """Number of rows ``x_i`` with ``sign<x_i, u> != sign<x_i, v>``."""
    X = np.asarray(X, dtype=float)
    return int(np.count_nonzero(sign_of(X @ np.asarray(u, float)) != sign_of(X @ np.asarray(v, float))))


def normalized_distance_gap(u, v):
    """``2 min(||u-v||/||u||, ||u-v||/||v||) - ||u/||u|| - v/||v||||``.

    Nonnegative whenever the normalized-distance inequality holds.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateIterate("both vectors must be nonzero")
    diff = np.linalg.norm(u - v)
    return float(2.0 * min(diff / nu, diff / nv) - np.linalg.norm(u / nu - v / nv))


def angular_fact_gaps(u, v):
    """Slacks of ``||u-v|| <= angle(u, v) <= (pi/2)||u-v||`` for unit u, v."""
    dist = float(np.linalg.norm(np.asarray(u, float) - np.asarray(v, float)))
    ang = angular_distance(u, v)
    return ang - dist, 0.5 * np.pi * dist - ang


@dataclass(frozen=True)
class Factor3Result:
    lhs: float
    rhs: float
    ok: bool


def check_factor3_lemma(u, v, J, k, tol=1e-10):
    """Compare top-k projection error against three times the error of the
    projection onto ``J | Supp(u) | Supp(T_k(v))``.

    ``lhs = ||u - T_k(v)/||T_k(v)||||`` and
    ``rhs = 3 ||u - T_S(v)/||T_S(v)||||``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    tk = top_k_threshold(v, k)
    ts = subset_threshold(v, _union(J, support(u), support(tk)))
    lhs = float(np.linalg.norm(u - normalize(tk)))
    rhs = 3.0 * float(np.linalg.norm(u - normalize(ts)))
    return Factor3Result(lhs, rhs, lhs <= rhs + tol)


@dataclass(frozen=True)
class DeviationDecomposition:
    total: float
    term1: float
    term2: float
    term3: float
    ok: bool


def decompose_deviation(X, y, theta_star, theta_prime, theta_dd, J, model, tol=1e-9):
    """Split the one-step deviation at ``theta_dd`` into three scaled terms.

    With ``D = sqrt(pi/2) gamma``::

        term1 = 2 ||h_J(theta*, theta') - (theta* - theta')|| / D
        term2 = 2 ||h_{Supp theta* | J}(theta', theta'') - (theta' - theta'')|| / D
        term3 = 2 ||hf_{Supp theta' | J}(theta*, theta*) + (1 - D) theta*|| / D

    and ``total = ||theta* - normalize(theta'' + hf_J(theta*, theta''))||``.
    Requires ``Supp(theta'') | J == Supp(theta') | J``.
    """
    ts = np.asarray(theta_star, dtype=float)
    tp = np.asarray(theta_prime, dtype=float)
    tdd = np.asarray(theta_dd, dtype=float)
    J = _union(J)
    if not np.array_equal(_union(support(tdd), J), _union(support(tp), J)):
        raise ValueError("need Supp(theta_dd) | J == Supp(theta_prime) | J")
    D = _HALF_PI_SQRT * gamma(model).gamma
    if D <= 0.0:
        raise DegenerateIterate("gamma is zero, so the deviation denominator vanishes")
    step = tdd + hf_fn_restricted(X, y, ts, tdd, J)
    total = float(np.linalg.norm(ts - normalize(step)))
    t1 = np.linalg.norm(h_fn_restricted(X, ts, tp, J) - (ts - tp))
    t2 = np.linalg.norm(h_fn_restricted(X, tp, tdd, _union(support(ts), J)) - (tp - tdd))
    t3 = np.linalg.norm(hf_fn_restricted(X, y, ts, ts, _union(support(tp), J)) + (1.0 - D) * ts)
    terms = [float(2.0 * t / D) for t in (t1, t2, t3)]
    return DeviationDecomposition(total, *terms, ok=bool(total <= sum(terms) + tol))


# ------------------------------------------------ Monte-Carlo expectations


@dataclass(frozen=True)
class ExpectationCheck:
    """Monte-Carlo estimate against its exact value, 3 standard errors.

    Entries with zero standard error must match to 1e-12.
    """

    name: str
    estimate: np.ndarray
    expected: np.ndarray
    std_error: np.ndarray
    ok: bool

    @property
    def worst_z(self):
        gap = np.abs(np.atleast_1d(self.estimate - self.expected))
        se = np.atleast_1d(self.std_error)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, gap / np.where(se > 0, se, 1.0), np.where(gap <= 1e-12, 0.0, np.inf))
        return float(z.max())


def _mean_check(name, samples, expected, z=3.0):
    samples = np.asarray(samples, dtype=float)
    m = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    gap = np.abs(m - expected)
    ok = bool(np.all(np.where(se > 0, gap <= z * se, gap <= 1e-12)))
    return ExpectationCheck(name, m, np.asarray(expected, dtype=float), se, ok)


def _norm_check(name, samples, expected, z=3.0):
    # delta method: d||m|| = <m/||m||, dm>
    samples = np.asarray(samples, dtype=float)
    m = samples.mean(axis=0)
    nm = np.linalg.norm(m)
    proj = samples @ (m / nm)
    se = proj.std(ddof=1) / np.sqrt(samples.shape[0])
    gap = abs(nm - expected)
    ok = bool(gap <= z * se) if se > 0 else bool(gap <= 1e-12)
    return ExpectationCheck(name, np.float64(nm), np.float64(expected), np.float64(se), ok)


def expectation_checks(model, d=50, k=5, n=500, replicates=2000, seed=0):
    """Monte-Carlo checks of the four exact expectations over fresh designs.

    A fixed ``theta*``, ``theta'`` and ``J`` (``|J| = k``) are drawn from
    ``seed``; each replicate draws a new design and new responses.  Returns
    a list of :class:`ExpectationCheck` for

    * ``E[h_J(theta*, theta')] = theta* - theta'``
    * ``E[<hf_J(theta*, theta*), theta*>] = -(1 - sqrt(pi/2) gamma)``
    * ``||E[theta' + hf_J(theta*, theta')]|| = sqrt(pi/2) gamma``
    * ``E[g_J(theta*, theta')] = 0``
    """
    setup = stream(seed, PROBE)
    ts = np.array(random_sparse_unit(d, k, setup))
    tp = np.array(random_sparse_unit(d, k, setup))
    J = np.sort(setup.choice(d, size=k, replace=False))
    g = gamma(model).gamma

    h_s = np.empty((replicates, d))
    ip_s = np.empty(replicates)
    step_s = np.empty((replicates, d))
    g_s = np.empty((replicates, d))
    for r in range(replicates):
        X = np.asarray(gaussian_design(n, d, derive_seed(stream(seed, r, DESIGN))))
        y = sample_responses(model, X @ ts, stream(seed, r, RESPONSES))
        h_s[r] = h_fn_restricted(X, ts, tp, J)
        ip_s[r] = np.dot(hf_fn_restricted(X, y, ts, ts, J), ts)
        step_s[r] = tp + hf_fn_restricted(X, y, ts, tp, J)
        g_s[r] = g_fn(X, ts, tp, J)
    return [
        _mean_check("E[h_J(theta*,theta')] = theta* - theta'", h_s, ts - tp),
        _mean_check("E[<hf_J(theta*,theta*),theta*>] = -(1 - sqrt(pi/2) gamma)", ip_s,
                    -(1.0 - _HALF_PI_SQRT * g)),
        _norm_check("||E[theta' + hf_J(theta*,theta')]|| = sqrt(pi/2) gamma", step_s, _HALF_PI_SQRT * g),
        _mean_check("E[g_J(theta*,theta')] = 0", g_s, np.zeros(d)),
    ]


@dataclass(frozen=True)
class MismatchLawReport:
    angle: float
    mean: float
    expected_mean: float
    std_error: float
    variance: float
    expected_variance: float
    mean_ok: bool
    variance_ok: bool

    @property
    def ok(self):
        return self.mean_ok and self.variance_ok


def mismatch_law(u, v, n=200, replicates=5000, seed=0, var_rtol=0.10):
    """Compare the mismatch count over fresh designs with
    ``Binomial(n, angle(u, v)/pi)``: mean within 3 s.e., variance within
    ``var_rtol`` relative."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = u.shape[0]
    counts = np.empty(replicates)
    for r in range(replicates):
        X = gaussian_design(n, d, derive_seed(stream(seed, r, DESIGN)))
        counts[r] = mismatch_count(X, u, v)
    ang = angular_distance(u, v)
    p = ang / np.pi
    mean, var = counts.mean(), counts.var(ddof=1)
    se = np.sqrt(var / replicates)
    exp_mean, exp_var = n * p, n * p * (1.0 - p)
    mean_ok = abs(mean - exp_mean) <= 3.0 * se if se > 0 else abs(mean - exp_mean) <= 1e-12
    var_ok = abs(var - exp_var) <= var_rtol * exp_var if exp_var > 0 else var == 0.0
    return MismatchLawReport(ang, float(mean), exp_mean, float(se), float(var), exp_var,
                             bool(mean_ok), bool(var_ok))


# -------------------------------------------------------------- RAIC probe


@dataclass(frozen=True)
class RaicSample:
    """One evaluation of the RAIC inequality at ``(theta'', J)``."""

    theta_dd: np.ndarray
    J: np.ndarray
    lhs: float
    rhs: float
    delta: float
    stratum: str = ""

    @property
    def violated(self):
        return self.lhs > self.rhs


@dataclass
class RaicProbeResult:
    samples: List[RaicSample] = field(default_factory=list)

    @property
    def violation_fraction(self):
        if not self.samples:
            return 0.0
        return sum(s.violated for s in self.samples) / len(self.samples)

    def by_stratum(self):
        out = {}
        for s in self.samples:
            hit, tot = out.get(s.stratum, (0, 0))
            out[s.stratum] = (hit + int(s.violated), tot + 1)
        return {k: hit / tot for k, (hit, tot) in out.items()}


def raic_sample(X, y, theta_star, theta_dd, J, delta, stratum=""):
    """Evaluate ``||theta* - normalize(theta'' + hf_J(theta*, theta''))||``
    against ``sqrt(delta ||theta* - theta''||) + delta``."""
    ts = np.asarray(theta_star, dtype=float)
    tdd = np.asarray(theta_dd, dtype=float)
    J = _union(J)
    step = tdd + hf_fn_restricted(X, y, ts, tdd, J)
    lhs = float(np.linalg.norm(ts - normalize(step)))
    rhs = float(np.sqrt(delta * np.linalg.norm(ts - tdd)) + delta)
    return RaicSample(tdd, J, lhs, rhs, delta, stratum)


_PERTURB_FRACTIONS = (0.5, 1.0, 2.0)
_PERTURB_FIXED = 0.5


def _draw_theta_dd(kind, ts, d, k, epsilon, rng):
    if kind == "near":
        r = rng.choice([f * epsilon for f in _PERTURB_FRACTIONS] + [_PERTURB_FIXED])
        noise = rng.standard_normal(d)
        return normalize(top_k_threshold(ts + r * noise / np.linalg.norm(noise), k))
    if kind == "random":
        return np.array(random_sparse_unit(d, k, rng))
    supp = support(ts)
    flips = rng.choice(supp, size=rng.integers(1, supp.size + 1), replace=False)
    out = ts.copy()
    out[flips] *= -1.0
    return out


_STRATA = ("near", "random", "flipped")


def raic_probe(model, theta_star, d, k, n, epsilon, num_probes, rng=None):
    """Empirical check of the RAIC inequality on one fresh design.

    ``theta''`` cycles through three strata: perturbations of ``theta*``
    re-projected onto the k-sparse sphere, uniform k-sparse unit vectors,
    and ``theta*`` with a random nonempty set of support signs flipped.
    ``J`` has a uniform size in ``0..k`` and uniform elements.
    """
    if n < 1 or num_probes < 1:
        raise ValueError("n and num_probes must be positive")
    rng = as_generator(rng)
    seed = derive_seed(rng)
    if theta_star is None:
        theta_star = random_sparse_unit(d, k, stream(seed, THETA_STAR))
    ts = np.asarray(theta_star, dtype=float)
    X = np.asarray(gaussian_design(n, d, derive_seed(stream(seed, DESIGN))))
    y = sample_responses(model, X @ ts, stream(seed, RESPONSES))
    delta = raic_delta(epsilon)
    probe_rng = stream(seed, PROBE)
    result = RaicProbeResult()
    for i in range(num_probes):
        kind = _STRATA[i % len(_STRATA)]
        tdd = _draw_theta_dd(kind, ts, d, k, epsilon, probe_rng)
        J = np.sort(probe_rng.choice(d, size=probe_rng.integers(0, k + 1), replace=False))
        result.samples.append(raic_sample(X, y, ts, tdd, J, delta, kind))
    return result

"""Binary GLM link models and their noise/slope quantities.

A link model is a success probability ``p: R -> [0, 1]``; responses are
``+1`` with probability ``p(<x, theta*>)`` and ``-1`` otherwise.  Two
scalar summaries of ``p`` drive the sample complexity of BIHT:

* ``alpha = Pr(f(Z) != sign(Z))``, the noise level, and
* ``gamma = E[Z f(Z)]``, the average slope,

with ``Z ~ N(0, 1)``.  Both reduce to half-line integrals of
``nu(z) = 1 - p(z) + p(-z)``::

    alpha = (2 pi)^(-1/2) int_0^inf exp(-z^2/2) nu(z) dz
    gamma = sqrt(2/pi) (1 - zeta),   zeta = int_0^inf z exp(-z^2/2) nu(z) dz
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import erfc

from .errors import InvalidLink, UnsupportedLink
from .linalg import sign_of
from .rng import as_generator

__all__ = [
    "LinkModel",
    "ModelQuantities",
    "AssumptionReport",
    "SQRT_2_OVER_PI",
    "DELTA_SCALE",
    "p_eval",
    "sample_responses",
    "alpha",
    "gamma",
    "model_quantities",
    "alpha_monte_carlo",
    "gamma_monte_carlo",
    "gamma_stein",
    "alpha0",
    "logistic_bounds",
    "check_assumption",
]

SQRT_2_OVER_PI = float(np.sqrt(2.0 / np.pi))
# (3/2)(5 + sqrt(21)): epsilon / DELTA_SCALE is the RAIC radius delta
DELTA_SCALE = 1.5 * (5.0 + np.sqrt(21.0))

KINDS = ("sign", "logistic", "probit", "custom")

# composite Gauss-Legendre: 32 panels x 16 nodes on [0, 12]
_QUAD_UPPER = 12.0
_QUAD_PANELS = 32
_QUAD_ORDER = 16
_STEIN_STEP = 1e-6
_RANGE_TOL = 1e-12


def _quadrature_rule():
    x, w = leggauss(_QUAD_ORDER)
    edges = np.linspace(0.0, _QUAD_UPPER, _QUAD_PANELS + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


_NODES, _WEIGHTS = _quadrature_rule()
_PROBE_GRID = np.linspace(-10.0, 10.0, 201)


@dataclass(frozen=True)
class LinkModel:
    """Specification of a binary GLM link.

    Use the ``sign``, ``logistic``, ``probit`` and ``custom`` constructors
    rather than calling the class directly.
    """

    kind: str
    beta: float = 0.0
    custom_p: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidLink(f"unknown link kind {self.kind!r}")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise InvalidLink(f"beta must be a finite nonnegative number, got {self.beta}")
        if self.kind == "custom":
            if self.custom_p is None:
                raise InvalidLink("custom link requires custom_p")
            _check_probabilities(_call_custom(self.custom_p, _PROBE_GRID))

    @classmethod
    def sign(cls):
        return cls("sign")

    @classmethod
    def logistic(cls, beta):
        return cls("logistic", float(beta))

    @classmethod
    def probit(cls, beta):
        return cls("probit", float(beta))

    @classmethod
    def custom(cls, p):
        return cls("custom", 0.0, p)

    @property
    def label(self):
        if self.kind in ("logistic", "probit"):
            return f"{self.kind}(beta={self.beta:g})"
        return self.kind

    def to_dict(self):
        if self.kind == "custom":
            return {"kind": "custom"}
        return {"kind": self.kind, "beta": self.beta}


@dataclass(frozen=True)
class ModelQuantities:
    """Noise ``alpha`` and/or slope ``gamma`` with the method that produced them."""

    alpha: Optional[float] = None
    gamma: Optional[float] = None
    method: str = "quadrature"
    std_error: float = 0.0


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the grid check for monotonicity and the noise-ratio condition.

    A clean report only means no counterexample was found on the grid.
    """

    monotone_ok: bool
    ratio_ok: bool
    worst_violation: float
    skipped_points: int = 0


def _call_custom(p, z):
    z = np.asarray(z, dtype=float)
    try:
        out = np.asarray(p(z), dtype=float)
        if out.shape != z.shape:
            raise ValueError
    except (TypeError, ValueError):
        out = np.vectorize(lambda t: float(p(t)), otypes=[float])(z)
    return out


def _check_probabilities(vals):
    if not np.all(np.isfinite(vals)) or np.any(vals < 0.0) or np.any(vals > 1.0):
        raise InvalidLink("link probabilities must lie in [0, 1]")
    return vals


def p_eval(model, z):
    """Success probability ``p(z)`` of the link, vectorized over ``z``."""
    z = np.asarray(z, dtype=float)
    if model.kind == "sign":
        out = np.where(z >= 0, 1.0, 0.0)
    elif model.kind == "logistic":
        # 1 / (1 + e^{-bz}) = exp(-log(1 + e^{-bz})), no overflow for any bz
        out = np.exp(-np.logaddexp(0.0, -model.beta * z))
    elif model.kind == "probit":
        out = 0.5 * erfc(-model.beta * z / np.sqrt(2.0))
    else:
        out = _check_probabilities(_call_custom(model.custom_p, z))
    return float(out) if out.ndim == 0 else out


def sample_responses(model, margins, rng=None):
    """Draw ``y_i = +1`` with probability ``p(margin_i)``, else ``-1``."""
    margins = np.asarray(margins, dtype=float)
    if not np.all(np.isfinite(margins)):
        raise ValueError("margins must be finite")
    if model.kind == "sign":
        return sign_of(margins)
    u = as_generator(rng).random(margins.shape)
    return np.where(u < p_eval(model, margins), 1.0, -1.0)


def _complement(model, z):
    # 1 - p(z) without cancellation; logistic and probit are symmetric
    if model.kind in ("logistic", "probit"):
        return p_eval(model, -np.asarray(z, dtype=float))
    return 1.0 - p_eval(model, z)


def _nu(model, z):
    return _complement(model, z) + p_eval(model, -z)


def _check_range(name, value, upper):
    if value < -_RANGE_TOL or value > upper + _RANGE_TOL:
        raise InvalidLink(f"{name}={value!r} is outside [0, {upper:g}]; is the link increasing?")
    return float(min(max(value, 0.0), upper))


def _alpha_quadrature(model):
    gauss = np.exp(-0.5 * _NODES**2)
    val = float(np.dot(_WEIGHTS, gauss * _nu(model, _NODES))) / np.sqrt(2.0 * np.pi)
    return _check_range("alpha", val, 0.5)


def _gamma_quadrature(model):
    zeta = float(np.dot(_WEIGHTS, _NODES * np.exp(-0.5 * _NODES**2) * _nu(model, _NODES)))
    return _check_range("gamma", SQRT_2_OVER_PI * (1.0 - zeta), SQRT_2_OVER_PI)


def _default_method(model):
    return "closed_form" if model.kind in ("sign", "probit") else "quadrature"


def alpha(model, method=None):
    """Noise level ``Pr(f(Z) != sign(Z))``.

    ``method`` is ``"closed_form"`` (sign, probit), ``"quadrature"`` (any
    link) or ``None`` to pick the closed form when one exists.
    """
    method = method or _default_method(model)
    if method == "closed_form":
        if model.kind == "sign":
            value = 0.0
        elif model.kind == "probit":
            value = 0.5 if model.beta == 0 else float(np.arctan(1.0 / model.beta) / np.pi)
        else:
            raise UnsupportedLink(f"no closed form for alpha of {model.label}")
    elif method == "quadrature":
        value = _alpha_quadrature(model)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ModelQuantities(alpha=_check_range("alpha", value, 0.5), method=method)


def gamma(model, method=None):
    """Average slope ``E[Z f(Z)]``; see :func:`alpha` for ``method``."""
    method = method or _default_method(model)
    if method == "closed_form":
        if model.kind == "sign":
            value = SQRT_2_OVER_PI
        elif model.kind == "probit":
            b = model.beta
            value = SQRT_2_OVER_PI * b / np.sqrt(b * b + 1.0)
        else:
            raise UnsupportedLink(f"no closed form for gamma of {model.label}")
    elif method == "quadrature":
        value = _gamma_quadrature(model)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ModelQuantities(gamma=_check_range("gamma", float(value), SQRT_2_OVER_PI), method=method)


def model_quantities(model, method=None):
    """Both ``alpha`` and ``gamma`` in one record."""
    a, g = alpha(model, method), gamma(model, method)
    return ModelQuantities(alpha=a.alpha, gamma=g.gamma, method=a.method)


def _monte_carlo(model, draws, rng, integrand, chunk=1_000_000):
    rng = as_generator(rng)
    total = 0.0
    total_sq = 0.0
    remaining = int(draws)
    while remaining > 0:
        m = min(chunk, remaining)
        vals = integrand(rng.standard_normal(m))
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
        remaining -= m
    mean = total / draws
    var = max(total_sq / draws - mean * mean, 0.0)
    return mean, float(np.sqrt(var / (draws - 1))) if draws > 1 else 0.0


def alpha_monte_carlo(model, draws=1_000_000, rng=None):
    """Monte-Carlo estimate of ``alpha`` with its standard error.

    Uses the conditional mismatch probability given ``Z`` (``1 - p(Z)`` for
    ``Z >= 0``, ``p(Z)`` otherwise), which is unbiased and lower-variance
    than simulating ``f`` itself.
    """
    def mismatch(z):
        return np.where(z >= 0, _complement(model, z), p_eval(model, z))

    mean, se = _monte_carlo(model, draws, rng, mismatch)
    return ModelQuantities(alpha=mean, method="monte_carlo", std_error=se)


def gamma_monte_carlo(model, draws=1_000_000, rng=None):
    """Monte-Carlo estimate of ``gamma = E[Z (2 p(Z) - 1)]``."""
    mean, se = _monte_carlo(model, draws, rng, lambda z: z * (2.0 * p_eval(model, z) - 1.0))
    return ModelQuantities(gamma=mean, method="monte_carlo", std_error=se)


def gamma_stein(model):
    """Slope via Stein's identity, ``2 E[p'(Z)]``.

    ``p'`` is a centered finite difference, so this path is independent of
    the ``zeta`` integral used by :func:`gamma`.
    """
    if model.kind == "sign":
        raise UnsupportedLink("the sign link is not differentiable")
    h = _STEIN_STEP

    def dp(z):
        return (p_eval(model, z + h) - p_eval(model, z - h)) / (2.0 * h)

    gauss = np.exp(-0.5 * _NODES**2)
    integral = float(np.dot(_WEIGHTS, (dp(_NODES) + dp(-_NODES)) * gauss)) / np.sqrt(2.0 * np.pi)
    return 2.0 * integral


def alpha0(model, epsilon):
    """Effective noise ``max(alpha, epsilon / ((3/2)(5 + sqrt(21))))``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return max(alpha(model).alpha, epsilon / DELTA_SCALE)


def logistic_bounds(beta):
    """Closed-form ``(alpha_upper, gamma_lower)`` for the logistic link.

    ``alpha <= min(1/2, 1/2 - sqrt(2/pi)(1 - b^2/6) b/4, sqrt(2/pi)/b)``
    and ``gamma >= sqrt(2/pi)(1 - 2 alpha)``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    alpha_upper = min(
        0.5,
        0.5 - SQRT_2_OVER_PI * (1.0 - beta**2 / 6.0) * beta / 4.0,
        SQRT_2_OVER_PI / beta,
    )
    gamma_lower = max(0.0, SQRT_2_OVER_PI * (1.0 - 2.0 * alpha_upper))
    return alpha_upper, gamma_lower


def check_assumption(model, z_grid=None, w_grid=(0.1, 0.5, 1.0, 2.0, 5.0), tol=1e-9):
    """Falsification check of the two link conditions on a finite grid.

    (i) ``p`` is nondecreasing, tested on the symmetric grid ``+/- z_grid``.
    (ii) ``nu(z + w) / nu(z)`` is nonincreasing in ``z >= 0`` for each ``w``.
    Grid points with ``nu(z) == 0`` are skipped and counted.
    """
    z = np.arange(0.0, 10.0 + 1e-12, 0.01) if z_grid is None else np.asarray(z_grid, dtype=float)
    full = np.concatenate([-z[::-1], z])
    p_vals = p_eval(model, full)
    drops = -np.diff(p_vals)
    monotone_violation = max(float(drops.max(initial=0.0)), 0.0)

    ratio_violation = 0.0
    skipped = 0
    nu_z = _nu(model, z)
    for w in w_grid:
        ok = nu_z > 0
        skipped += int(np.count_nonzero(~ok))
        ratio = _nu(model, z[ok] + w) / nu_z[ok]
        if ratio.size > 1:
            ratio_violation = max(ratio_violation, float(np.diff(ratio).max()))
    worst = max(monotone_violation, ratio_violation, 0.0)
    return AssumptionReport(
        monotone_ok=monotone_violation <= tol,
        ratio_ok=ratio_violation <= tol,
        worst_violation=worst if worst > tol else 0.0,
        skipped_points=skipped,
    )

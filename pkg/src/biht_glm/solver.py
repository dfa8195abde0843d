"""Binary iterative hard thresholding (BIHT).

Each step takes a subgradient step on the one-sided loss
``J(theta) = sum_i max(0, -y_i <x_i, theta>)`` with step size
``sqrt(2 pi) / n``, keeps the ``k`` largest entries and (for the
normalized variant) projects back to the unit sphere.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DegenerateIterate
from .linalg import normalize, random_sparse_unit, sign_of, top_k_threshold
from .rng import INIT, stream

__all__ = ["BihtConfig", "TrialTrace", "VARIANTS", "relu_loss", "biht_step", "biht_run"]

VARIANTS = ("normalized", "unnormalized")
STEP_SCALE = float(np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class BihtConfig:
    """Solver settings.

    Parameters
    ----------
    k : int
        Sparsity budget of every iterate.
    max_iters : int
        Number of BIHT steps ``T``.
    variant : {"normalized", "unnormalized"}
    init_seed : int
        Seed of the stream that draws the initial iterate.
    tol : float, optional
        Stop once consecutive iterates differ by at most ``tol``.  Off by
        default, so runs last exactly ``max_iters`` steps.
    """

    k: int
    max_iters: int = 30
    variant: str = "normalized"
    init_seed: int = 0
    tol: Optional[float] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.tol is not None and not self.tol >= 0:
            raise ValueError("tol must be nonnegative")


@dataclass
class TrialTrace:
    """Per-iteration record of one run, indexed by ``t = 0..T``.

    ``errors`` is empty when the true parameter was not supplied.
    """

    iterates: List[np.ndarray] = field(default_factory=list)
    errors: List[float] = field(default_factory=list)
    mismatch_fractions: List[float] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)

    def __len__(self):
        return len(self.iterates)

    @property
    def final_error(self):
        return self.errors[-1] if self.errors else None


def _margins(X, theta):
    # theta is k-sparse, so only its support columns contribute
    supp = np.flatnonzero(theta)
    return X[:, supp] @ theta[supp]


def relu_loss(X, y, theta):
    """One-sided loss ``sum_i max(0, -y_i <x_i, theta>)``."""
    X = np.asarray(X, dtype=float)
    margins = X @ np.asarray(theta, dtype=float)
    return float(np.maximum(0.0, -np.asarray(y, dtype=float) * margins).sum())


def _step_from_margins(X, y, theta, margins, k, variant):
    n = X.shape[0]
    # (y - sign(X theta)) / 2 is y on mismatched rows and 0 elsewhere
    rows = np.flatnonzero(y != sign_of(margins))
    theta_tilde = theta + (STEP_SCALE / n) * (X[rows].T @ y[rows])
    out = top_k_threshold(theta_tilde, k)
    if variant == "normalized":
        return normalize(out)
    if not np.any(out):
        raise DegenerateIterate("thresholded iterate is zero")
    return out


def biht_step(X, y, theta_hat, k, variant="normalized"):
    """One BIHT update.

    Parameters
    ----------
    X : (n, d) array_like
    y : (n,) array_like of +/-1
    theta_hat : (d,) array_like
        Current iterate.
    k : int
        Sparsity budget; ``k == d`` skips thresholding.
    variant : {"normalized", "unnormalized"}

    Returns
    -------
    ndarray
        The next iterate.  Unit norm for the normalized variant.

    Raises
    ------
    DegenerateIterate
        If the thresholded vector is zero.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta_hat, dtype=float)
    if X.shape != (y.shape[0], theta.shape[0]):
        raise ValueError("dimensions of X, y and theta_hat disagree")
    return _step_from_margins(X, y, theta, _margins(X, theta), k, variant)


def biht_run(X, y, config, theta_star=None, theta_init=None):
    """Run BIHT for ``config.max_iters`` steps and record the trace.

    The initial iterate is drawn from the k-sparse unit sphere using
    ``config.init_seed`` unless ``theta_init`` is given.  Errors of the
    unnormalized variant are measured after normalizing the iterate.

    Raises
    ------
    DegenerateIterate
        With ``iteration`` set to the step that collapsed.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError("y must have one entry per row of X")
    if config.k > d:
        raise ValueError(f"k={config.k} exceeds d={d}")
    if theta_init is None:
        theta = np.array(random_sparse_unit(d, config.k, stream(config.init_seed, INIT)))
    else:
        theta = np.asarray(theta_init, dtype=float).copy()
    star = None if theta_star is None else np.asarray(theta_star, dtype=float)

    trace = TrialTrace()
    t = 0
    while True:
        margins = _margins(X, theta)
        trace.iterates.append(theta)
        trace.mismatch_fractions.append(float(np.count_nonzero(y != sign_of(margins))) / n)
        trace.losses.append(float(np.maximum(0.0, -y * margins).sum()))
        if star is not None:
            unit = theta if config.variant == "normalized" else normalize(theta)
            trace.errors.append(float(np.linalg.norm(star - unit)))
        if t == config.max_iters:
            break
        t += 1
        try:
            nxt = _step_from_margins(X, y, theta, margins, config.k, config.variant)
        except DegenerateIterate as exc:
            raise DegenerateIterate("thresholded iterate is zero", iteration=t) from exc
        if config.tol is not None and np.linalg.norm(nxt - theta) <= config.tol:
            theta = nxt
            config = _stop_after(config, t)
            continue
        theta = nxt
    return trace


def _stop_after(config, t):
    # record the converged iterate and finish
    return BihtConfig(config.k, t, config.variant, config.init_seed, None)

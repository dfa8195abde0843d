"""Vector and matrix primitives: thresholding, normalization, random draws.

Supports are 0-based sorted integer arrays throughout.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateIterate
from .rng import as_generator, stream

__all__ = [
    "SparseUnitVector",
    "GaussianDesign",
    "sign_of",
    "support",
    "top_k_threshold",
    "subset_threshold",
    "normalize",
    "random_sparse_unit",
    "gaussian_design",
    "l2_error",
    "angular_distance",
]


def sign_of(a):
    """Sign with the convention ``sign(0) = +1``.

    Returns a Python float for scalar input and a float array otherwise.
    """
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("sign_of requires finite input")
    out = np.where(arr >= 0, 1.0, -1.0)
    return float(out) if out.ndim == 0 else out


def support(v):
    """Sorted indices of the nonzero entries of ``v``."""
    return np.flatnonzero(np.asarray(v))


def _as_index_set(J, d):
    J = np.unique(np.asarray(list(J) if not isinstance(J, np.ndarray) else J, dtype=np.intp))
    if J.size and (J[0] < 0 or J[-1] >= d):
        raise IndexError(f"support indices must lie in [0, {d})")
    return J


def top_k_threshold(v, k):
    """Keep the ``k`` largest-magnitude entries of ``v`` and zero the rest.

    Ties are broken in favour of the lowest index.
    """
    v = np.asarray(v, dtype=float)
    d = v.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= d={d}, got {k}")
    if k == d:
        return v.copy()
    # stable sort on -|v| keeps lower indices first among equal magnitudes
    keep = np.argsort(-np.abs(v), kind="stable")[:k]
    out = np.zeros_like(v)
    out[keep] = v[keep]
    return out


def subset_threshold(v, J):
    """Zero every entry of ``v`` whose index is not in ``J``."""
    v = np.asarray(v, dtype=float)
    J = _as_index_set(J, v.shape[0])
    out = np.zeros_like(v)
    out[J] = v[J]
    return out


def normalize(v):
    """Scale ``v`` to unit Euclidean norm; raise on the zero vector."""
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise DegenerateIterate("cannot normalize a zero (or non-finite) vector")
    return v / nrm


@dataclass(frozen=True)
class SparseUnitVector:
    """A unit-norm vector with at most ``sparsity_budget`` nonzeros.

    Behaves like its ``entries`` array under ``np.asarray``.
    """

    entries: np.ndarray
    sparsity_budget: int

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        if not 1 <= self.sparsity_budget <= e.shape[0]:
            raise ValueError("sparsity_budget must lie in [1, dim]")
        if np.count_nonzero(e) > self.sparsity_budget:
            raise ValueError("too many nonzero entries for the sparsity budget")
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError("entries must have unit l2 norm")

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def support(self):
        return support(self.entries)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class GaussianDesign:
    """An ``rows x cols`` matrix of i.i.d. N(0, 1) covariates, one row per sample.

    The matrix is read-only and fully determined by ``seed``.
    """

    rows: int
    cols: int
    seed: int
    entries: np.ndarray = field(repr=False, compare=False)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def shape(self):
        return self.entries.shape


def random_sparse_unit(d, k, rng=None):
    """Draw uniformly from the k-sparse unit sphere in R^d.

    The support is a uniform k-subset; the direction on it is a normalized
    standard-normal vector.
    """
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= d={d}, got {k}")
    rng = as_generator(rng)
    supp = np.sort(rng.choice(d, size=k, replace=False))
    vals = rng.standard_normal(k)
    while not np.all(vals):  # measure-zero, keeps the support exact
        vals = rng.standard_normal(k)
    v = np.zeros(d)
    v[supp] = vals / np.linalg.norm(vals)
    return SparseUnitVector(v, k)


def gaussian_design(n, d, seed):
    """Draw an ``n x d`` standard Gaussian design, reproducible from ``seed``."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    try:
        X = stream(seed).standard_normal((n, d))
    except MemoryError as exc:
        raise MemoryError(f"cannot allocate a {n}x{d} design") from exc
    X.setflags(write=False)
    return GaussianDesign(n, d, int(seed), X)


def l2_error(u, v):
    """Euclidean distance between two unit vectors."""
    return float(np.linalg.norm(np.asarray(u, dtype=float) - np.asarray(v, dtype=float)))


def angular_distance(u, v):
    """Angle between two unit vectors, in ``[0, pi]``.

    Uses ``2 atan2(||u - v||, ||u + v||)``, which equals ``arccos<u, v>``
    for unit vectors but keeps full relative accuracy for nearly parallel
    or antiparallel pairs, where ``arccos`` of the inner product loses
    about half the significant digits.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(2.0 * np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v)))

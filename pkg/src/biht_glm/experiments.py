"""Seeded Monte-Carlo trials of BIHT, aggregation and export.

Trial ``i`` draws its true parameter, design, responses and initial iterate
from streams keyed by ``(master_seed, i, tag)``, so results do not depend on
how many workers run or in which order trials finish.
"""
import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from .errors import DegenerateIterate, ExperimentFailed
from .glm import LinkModel, sample_responses
from .linalg import gaussian_design, random_sparse_unit
from .rng import DESIGN, INIT, RESPONSES, THETA_STAR, derive_seed, stream
from .solver import VARIANTS, BihtConfig, biht_run
from .theory import theoretical_error_curve

__all__ = [
    "ExperimentConfig",
    "AggregateResult",
    "SweepRow",
    "CSV_COLUMNS",
    "SWEEP_COLUMNS",
    "figure_config",
    "run_trial",
    "run_experiment",
    "run_variants",
    "sweep_n",
    "emit_results",
    "emit_sweep",
    "load_results",
]

CSV_COLUMNS = ("iter", "mean_error", "median_error", "q10_error", "q90_error",
               "mean_mismatch_frac", "theory_bound")
SWEEP_COLUMNS = ("n", "mean_final_error", "mean_final_error_sq", "inv_error_sq")
_VARIANT_CHOICES = VARIANTS + ("both",)


def _model_from_dict(spec):
    kind = spec["kind"]
    if kind == "sign":
        return LinkModel.sign()
    if kind in ("logistic", "probit"):
        return LinkModel(kind, float(spec["beta"]))
    raise ValueError(f"cannot rebuild a {kind!r} link from a config file")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a batch of independent BIHT trials.

    ``fixed_theta_star`` reuses one true parameter for every trial instead
    of redrawing it per trial.
    """

    d: int
    k: int
    n: int
    model: LinkModel
    trials: int = 100
    iters: int = 30
    epsilon: float = 0.25
    variant: str = "normalized"
    master_seed: int = 0
    fixed_theta_star: bool = False

    def __post_init__(self):
        for name in ("d", "k", "n", "trials", "iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.k > self.d:
            raise ValueError(f"k={self.k} exceeds d={self.d}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.variant not in _VARIANT_CHOICES:
            raise ValueError(f"variant must be one of {_VARIANT_CHOICES}")

    @property
    def variants(self):
        return VARIANTS if self.variant == "both" else (self.variant,)

    def replace(self, **changes):
        spec = {**self.__dict__, **changes}
        return ExperimentConfig(**spec)

    def to_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k != "model"}
        out["model"] = self.model.to_dict()
        return out

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec)
        spec["model"] = _model_from_dict(spec["model"])
        return cls(**spec)


def figure_config(fig_id, scale=1.0, seed=0):
    """Settings of the two reference experiments.

    Both use ``d = 2000, k = 5, epsilon = 0.25, T = 30`` and 100 trials
    (times ``scale``) and run both variants.  Figure 1 uses the logistic
    link with ``beta = 1`` and ``n = 3000``; figure 2 the sign link with
    ``n = 700``.
    """
    if not 0.0 < scale <= 1.0:
        raise ValueError("scale must lie in (0, 1]")
    trials = max(1, int(round(100 * scale)))
    common = dict(d=2000, k=5, trials=trials, iters=30, epsilon=0.25, variant="both", master_seed=seed)
    if fig_id == 1:
        return ExperimentConfig(n=3000, model=LinkModel.logistic(1.0), **common)
    if fig_id == 2:
        return ExperimentConfig(n=700, model=LinkModel.sign(), **common)
    raise ValueError("figure id must be 1 or 2")


# ----------------------------------------------------------------- trials


def _trial_inputs(config, trial_index):
    seed = config.master_seed
    ts_stream = stream(seed, THETA_STAR) if config.fixed_theta_star else stream(seed, trial_index, THETA_STAR)
    theta_star = np.asarray(random_sparse_unit(config.d, config.k, ts_stream))
    X = np.asarray(gaussian_design(config.n, config.d, derive_seed(stream(seed, trial_index, DESIGN))))
    y = sample_responses(config.model, X @ theta_star, stream(seed, trial_index, RESPONSES))
    init_seed = derive_seed(stream(seed, trial_index, INIT))
    return X, y, theta_star, init_seed


def _run_variants(config, trial_index, variants):
    X, y, theta_star, init_seed = _trial_inputs(config, trial_index)
    out = {}
    for v in variants:
        bc = BihtConfig(config.k, config.iters, v, init_seed)
        try:
            out[v] = biht_run(X, y, bc, theta_star)
        except DegenerateIterate as exc:
            out[v] = exc
    return out


def run_trial(config, trial_index, variant=None):
    """Run one seeded trial and return its :class:`TrialTrace`.

    ``variant`` defaults to ``config.variant``; it must name a single
    variant when the config asks for both.

    Raises
    ------
    DegenerateIterate
        If the run collapsed; :func:`run_experiment` counts these as failed.
    """
    if not 0 <= trial_index < config.trials:
        raise IndexError(f"trial_index must lie in [0, {config.trials})")
    variant = variant or config.variant
    if variant not in VARIANTS:
        raise ValueError("run_trial needs a single variant")
    res = _run_variants(config, trial_index, (variant,))[variant]
    if isinstance(res, Exception):
        raise res
    return res


def _compact_trial(args):
    # worker entry point: returns only the per-iteration metrics
    config, trial_index = args
    out = {}
    for v, res in _run_variants(config, trial_index, config.variants).items():
        if isinstance(res, Exception):
            out[v] = None
        else:
            out[v] = (np.asarray(res.errors), np.asarray(res.mismatch_fractions))
    return out


def _map_trials(config, jobs):
    tasks = [(config, i) for i in range(config.trials)]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or config.trials == 1:
        return [_compact_trial(t) for t in tasks]
    chunk = max(1, config.trials // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves trial order regardless of completion order
        return list(pool.map(_compact_trial, tasks, chunksize=chunk))


# ------------------------------------------------------------ aggregation


def _nearest_rank(sorted_vals, q):
    idx = max(0, math.ceil(q * len(sorted_vals)) - 1)
    return float(sorted_vals[idx])


@dataclass
class AggregateResult:
    """Per-iteration statistics over the successful trials of one variant.

    ``final_success_fraction`` counts failed trials as unsuccessful.
    """

    variant: str
    config: Dict
    per_iteration: List[Dict] = field(default_factory=list)
    final_success_fraction: float = 0.0
    failed_trials: int = 0
    final_errors: List[float] = field(default_factory=list)

    @property
    def mean_errors(self):
        return np.array([row["mean_error"] for row in self.per_iteration])

    @property
    def theoretical_curve(self):
        return np.array([row["theory_bound"] for row in self.per_iteration])

    @property
    def mean_final_error(self):
        return self.per_iteration[-1]["mean_error"]

    def to_dict(self):
        return asdict(self)


def _aggregate(config, variant, compact):
    ok = [c[variant] for c in compact if c[variant] is not None]
    failed = len(compact) - len(ok)
    if not ok:
        raise ExperimentFailed(f"all {len(compact)} trials of the {variant} variant degenerated")
    errors = np.vstack([e for e, _ in ok])
    mism = np.vstack([m for _, m in ok])
    theory = theoretical_error_curve(config.epsilon, np.arange(errors.shape[1]))
    rows = []
    for t in range(errors.shape[1]):
        col = np.sort(errors[:, t])
        rows.append({
            "iter": t,
            "mean_error": float(col.mean()),
            "median_error": _nearest_rank(col, 0.5),
            "q10_error": _nearest_rank(col, 0.1),
            "q90_error": _nearest_rank(col, 0.9),
            "min_error": float(col[0]),
            "max_error": float(col[-1]),
            "mean_mismatch_frac": float(mism[:, t].mean()),
            "theory_bound": float(theory[t]),
        })
    final = errors[:, -1]
    success = float(np.count_nonzero(final <= config.epsilon)) / len(compact)
    return AggregateResult(variant, config.to_dict(), rows, success, failed, [float(e) for e in final])


def run_variants(config, jobs=1):
    """Run every trial once and aggregate each requested variant.

    With ``variant='both'`` the two variants share designs, responses and
    initial iterates trial by trial.  Returns ``{variant: AggregateResult}``.
    """
    compact = _map_trials(config, jobs)
    return {v: _aggregate(config, v, compact) for v in config.variants}


def run_experiment(config, jobs=1):
    """Run all trials of a single-variant config and aggregate them.

    Raises
    ------
    ExperimentFailed
        If every trial degenerated.
    """
    if config.variant == "both":
        raise ValueError("run_experiment takes a single variant; use run_variants for both")
    return run_variants(config, jobs)[config.variant]


@dataclass(frozen=True)
class SweepRow:
    n: int
    mean_final_error: float
    mean_final_error_sq: float
    inv_error_sq: float


def sweep_n(config, n_values, jobs=1):
    """Final-error scaling table over increasing sample sizes.

    ``mean_final_error_sq`` is the square of the mean final error and
    ``inv_error_sq`` its reciprocal.  Runs the normalized variant unless the
    config names the unnormalized one.
    """
    n_values = [int(n) for n in n_values]
    if not n_values:
        raise ValueError("n_values must be nonempty")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be strictly increasing")
    variant = "normalized" if config.variant == "both" else config.variant
    rows = []
    for n in n_values:
        res = run_experiment(config.replace(n=n, variant=variant), jobs)
        e = res.mean_final_error
        rows.append(SweepRow(n, e, e * e, 1.0 / (e * e) if e > 0 else math.inf))
    return rows


# ----------------------------------------------------------------- export


def _write_text(path, text):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc


def _csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()


def emit_results(result, fmt, path):
    """Write an :class:`AggregateResult` as CSV or JSON.

    Output depends only on the result, so identical runs give identical
    bytes.
    """
    if fmt == "csv":
        text = _csv_text(CSV_COLUMNS, result.per_iteration)
    elif fmt == "json":
        text = json.dumps(result.to_dict(), indent=2) + "\n"
    else:
        raise ValueError("format must be 'csv' or 'json'")
    _write_text(path, text)


def emit_sweep(rows, path):
    """Write sweep rows as CSV."""
    _write_text(path, _csv_text(SWEEP_COLUMNS, [asdict(r) for r in rows]))


def load_results(path):
    """Read back a JSON file written by :func:`emit_results`."""
    try:
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc.strerror or exc}") from exc
    return AggregateResult(**spec)

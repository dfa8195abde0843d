"""Command-line front end: ``biht-glm {run,sweep,figure,verify,alpha-gamma}``.

Exit codes: 0 success, 1 usage or I/O error, 2 every trial degenerated,
3 a verification property failed.

Settings are resolved as: command-line flag, then the ``--config`` JSON
file, then ``BIHT_SEED`` (seed only), then the built-in default.
"""
import argparse
import csv
import io
import json
import os
import sys

from .errors import BihtError, ExperimentFailed
from .experiments import (
    ExperimentConfig,
    emit_results,
    emit_sweep,
    figure_config,
    run_variants,
    sweep_n,
)
from .glm import LinkModel, alpha, gamma, gamma_stein, logistic_bounds
from .verification import SUITES, run_suite

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_VERIFY = 0, 1, 2, 3

DEFAULTS = {
    "trials": 100,
    "iters": 30,
    "epsilon": 0.25,
    "variant": "normalized",
    "seed": 0,
    "fixed_theta_star": False,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("list must be nonempty")
    return vals


def _int_list(text):
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError("expected integers")
    return [int(v) for v in vals]


def _jobs_arg(p):
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes for trials (default: available cores); output is identical for any value")


def _seed_arg(p):
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: $BIHT_SEED, else 0)")


def _experiment_args(p):
    p.add_argument("--config", help="JSON file of defaults; explicit flags override it")
    p.add_argument("--d", type=int, help="ambient dimension")
    p.add_argument("--k", type=int, help="sparsity")
    p.add_argument("--model", choices=("sign", "logistic", "probit"), help="link model")
    p.add_argument("--beta", type=float, help="inverse temperature / SNR (logistic, probit)")
    p.add_argument("--trials", type=int, help=f"number of trials (default {DEFAULTS['trials']})")
    p.add_argument("--iters", type=int, help=f"BIHT iterations T (default {DEFAULTS['iters']})")
    p.add_argument("--epsilon", type=float, help=f"target error (default {DEFAULTS['epsilon']})")
    p.add_argument("--variant", choices=("normalized", "unnormalized", "both"),
                   help=f"BIHT variant (default {DEFAULTS['variant']})")
    p.add_argument("--fixed-theta-star", action="store_true", default=None,
                   help="use one true parameter for all trials")
    _seed_arg(p)
    _jobs_arg(p)


def build_parser():
    parser = _Parser(prog="biht-glm", description="BIHT for sparse binary GLMs: experiments and checks.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("run", help="run one batch of seeded trials",
                       description="Run seeded BIHT trials and write per-iteration CSV and JSON.")
    _experiment_args(p)
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--out", required=True,
                   help="output path; writes <stem>.csv and <stem>.json (suffixed _<variant> for 'both')")

    p = sub.add_parser("sweep", help="final error over a range of sample sizes",
                       description="Run one experiment per n and write the error-scaling table.")
    _experiment_args(p)
    p.add_argument("--n-values", type=_int_list, required=True, help="comma-separated increasing sample sizes")
    p.add_argument("--out", required=True, help="CSV output path")

    p = sub.add_parser("figure", help="reproduce a reference experiment",
                       description="Run both variants with the reference settings of figure 1 or 2.")
    p.add_argument("--id", type=int, choices=(1, 2), required=True, help="figure id")
    p.add_argument("--scale", type=float, default=1.0, help="fraction of the 100 trials to run, in (0, 1]")
    p.add_argument("--out", required=True, help="output stem; writes <stem>_normalized.csv etc.")
    _seed_arg(p)
    _jobs_arg(p)

    p = sub.add_parser("verify", help="run property suites",
                       description="Run property suites and print a pass/fail table.")
    p.add_argument("--suite", choices=("all",) + tuple(SUITES), default="all", help="suite to run")
    _seed_arg(p)

    p = sub.add_parser("alpha-gamma", help="tabulate noise and slope",
                       description="Tabulate alpha, gamma and the Stein estimate over a beta grid.")
    p.add_argument("--model", choices=("sign", "logistic", "probit"), required=True, help="link model")
    p.add_argument("--beta-grid", type=_float_list, help="comma-separated beta values (logistic, probit)")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    return parser


# ---------------------------------------------------------------- helpers


def _resolve_seed(args, file_cfg):
    if args.seed is not None:
        return args.seed
    if "seed" in file_cfg:
        return int(file_cfg["seed"])
    env = os.environ.get("BIHT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"BIHT_SEED must be an integer, got {env!r}") from exc
    return DEFAULTS["seed"]


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _make_model(kind, beta):
    if kind == "sign":
        return LinkModel.sign()
    if beta is None:
        raise UsageError(f"--beta is required for the {kind} model")
    return LinkModel(kind, float(beta))


def _experiment_config(args, n_required=True):
    file_cfg = _load_config(args.config)

    def pick(name):
        val = getattr(args, name, None)
        if val is None:
            val = file_cfg.get(name, DEFAULTS.get(name))
        return val

    missing = [f"--{k}" for k in (("d", "k", "n", "model") if n_required else ("d", "k", "model"))
               if pick(k) is None]
    if missing:
        raise UsageError(f"missing required flag(s): {', '.join(missing)}")
    try:
        return ExperimentConfig(
            d=int(pick("d")),
            k=int(pick("k")),
            n=int(pick("n")) if n_required else 1,
            model=_make_model(pick("model"), pick("beta")),
            trials=int(pick("trials")),
            iters=int(pick("iters")),
            epsilon=float(pick("epsilon")),
            variant=pick("variant"),
            master_seed=_resolve_seed(args, file_cfg),
            fixed_theta_star=bool(pick("fixed_theta_star")),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _stem(path):
    root, ext = os.path.splitext(path)
    return root if ext.lower() in (".csv", ".json") else path


def _write_variants(results, stem, always_suffix=False):
    suffix = always_suffix or len(results) > 1
    for variant, res in results.items():
        base = f"{stem}_{variant}" if suffix else stem
        emit_results(res, "csv", base + ".csv")
        emit_results(res, "json", base + ".json")
        print(f"{variant}: final mean error {res.mean_final_error:.4f}, "
              f"success fraction {res.final_success_fraction:.3f}, "
              f"failed trials {res.failed_trials} -> {base}.csv")


# --------------------------------------------------------------- commands


def cmd_run(args):
    config = _experiment_config(args)
    _write_variants(run_variants(config, args.jobs), _stem(args.out))
    return EXIT_OK


def cmd_sweep(args):
    config = _experiment_config(args, n_required=False)
    try:
        rows = sweep_n(config, args.n_values, args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    emit_sweep(rows, args.out)
    for r in rows:
        print(f"n={r.n}: mean final error {r.mean_final_error:.4f}, 1/error^2 {r.inv_error_sq:.3f}")
    return EXIT_OK


def cmd_figure(args):
    try:
        config = figure_config(args.id, args.scale, _resolve_seed(args, {}))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write_variants(run_variants(config, args.jobs), _stem(args.out), always_suffix=True)
    return EXIT_OK


def cmd_verify(args):
    results = run_suite(args.suite, _resolve_seed(args, {}))
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = [r.name for r in results if not r.ok]
    if failed:
        print("failed properties: " + "; ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _fmt(x):
    return "" if x is None else repr(float(x))


def cmd_alpha_gamma(args):
    if args.model == "sign":
        grid = [None]
    elif args.beta_grid is None:
        raise UsageError(f"--beta-grid is required for the {args.model} model")
    else:
        grid = args.beta_grid
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["beta", "alpha", "gamma", "gamma_stein", "alpha_upper", "gamma_lower"])
    for beta in grid:
        try:
            model = _make_model(args.model, beta)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        stein = None if args.model == "sign" else gamma_stein(model)
        bounds = (None, None)
        if args.model == "logistic" and beta > 0:
            bounds = logistic_bounds(beta)
        writer.writerow([_fmt(beta), _fmt(alpha(model).alpha), _fmt(gamma(model).gamma), _fmt(stein),
                         _fmt(bounds[0]), _fmt(bounds[1])])
    text = buf.getvalue()
    if args.out:
        try:
            with open(args.out, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "figure": cmd_figure,
    "verify": cmd_verify,
    "alpha-gamma": cmd_alpha_gamma,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"biht-glm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentFailed as exc:
        print(f"biht-glm {args.command}: experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (OSError, BihtError) as exc:
        print(f"biht-glm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: train, predict, evaluate, tune, and dev tools.

Results go to stdout, logs to stderr.  Exit codes: 0 success, 1 input or
configuration error, 2 numerical failure.  Every command is
deterministic for a fixed ``--seed``.  A ``--config`` JSON file provides
defaults that explicit flags override.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .data import load_csv, load_sparse_text
from .datasets import load_benchmark
from .exceptions import InputError, NumericalError
from .kernels import KernelConfig
from .nonlinear import TrainConfig
from .oracles import gibbs_linear, gibbs_nonlinear, quad_gig_moment, sample_summary
from .pipeline import cross_validate, train_model, tune_theta
from .prediction import error_rate
from .serialize import load_model, save_model

__all__ = ["main", "build_parser"]


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting, so errors map to
    our exit-code convention."""

    def error(self, message):
        raise InputError(message)


# ----------------------------------------------------------------------
# flag plumbing
# ----------------------------------------------------------------------


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV file, sparse text file, "
                   "or a built-in name (breast-cancer, heart, waveform, susy)")
    p.add_argument("--label-col", default="-1",
                   help="label column index or header name (CSV only)")
    p.add_argument("--sparse", action="store_true",
                   help="read --data as 'label idx:value ...' sparse text")
    p.add_argument("--data-dir", default=None,
                   help="directory searched for benchmark CSV files")


def _add_model_flags(p):
    p.add_argument("--kernel", default="rbf", choices=("rbf", "sqexp", "linear"))
    p.add_argument("--theta", type=float, default=2.0, help="kernel length scale")
    p.add_argument("--jitter", type=float, default=1e-8)
    p.add_argument("--linear", action="store_true",
                   help="train the primal linear model (no kernel)")
    p.add_argument("--inducing", default="kmeans", choices=("kmeans", "random"))
    p.add_argument("--num-inducing", type=int, default=None,
                   help="inducing point count (default: 20%% of training size)")
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--link", default="sqrt", choices=("sqrt", "plain"))
    p.add_argument("--batch", type=int, default=10, help="minibatch size")
    p.add_argument("--epochs", type=int, default=80)
    p.add_argument("--lr-tau", type=float, default=1.0)
    p.add_argument("--lr-exponent", type=float, default=0.75)
    p.add_argument("--tol", type=float, default=0.0,
                   help="stochastic-ELBO convergence tolerance (0 disables)")
    p.add_argument("--average-tail", type=float, default=0.5,
                   help="fraction of iterations averaged into the final state")
    p.add_argument("--batch-mode", action="store_true",
                   help="full-batch coordinate ascent instead of minibatches")
    p.add_argument("--auto-tune", action="store_true",
                   help="interleave kernel hyperparameter ascent steps")
    p.add_argument("--tune-interval", type=int, default=10)
    p.add_argument("--tune-step-size", type=float, default=0.1)


def _add_common_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS/LAPACK worker threads")
    p.add_argument("--config", default=None,
                   help="JSON file of flag defaults (explicit flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bsvm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model and save it as JSON")
    _add_data_flags(p_train)
    _add_model_flags(p_train)
    _add_common_flags(p_train)
    p_train.add_argument("--model-out", required=True)
    p_train.add_argument("--log-out", default=None,
                         help="per-iteration CSV log path")

    p_pred = sub.add_parser("predict", help="predict with a saved model")
    p_pred.add_argument("--model", required=True)
    _add_data_flags(p_pred)
    _add_common_flags(p_pred)
    p_pred.add_argument("--out", default=None, help="output CSV (default stdout)")

    p_eval = sub.add_parser("evaluate", aliases=["cross-validate"],
                            help="k-fold cross-validated metrics")
    _add_data_flags(p_eval)
    _add_model_flags(p_eval)
    _add_common_flags(p_eval)
    p_eval.add_argument("--folds", type=int, default=10)
    p_eval.add_argument("--json-out", default=None,
                        help="write the EvalReport as JSON here")

    p_tune = sub.add_parser("tune", help="ML-II kernel hyperparameter search")
    _add_data_flags(p_tune)
    _add_model_flags(p_tune)
    _add_common_flags(p_tune)
    p_tune.add_argument("--model-out", default=None)
    p_tune.add_argument("--log-out", default=None,
                        help="per-step CSV of (iteration, hyperparameters, ELBO)")

    p_dev = sub.add_parser("dev", help="oracle tools for testing")
    dev_sub = p_dev.add_subparsers(dest="dev_command", required=True)

    d_gibbs = dev_sub.add_parser("gibbs", help="exact-conditional sampler (kernel)")
    _add_data_flags(d_gibbs)
    _add_common_flags(d_gibbs)
    d_gibbs.add_argument("--kernel", default="rbf", choices=("rbf", "sqexp", "linear"))
    d_gibbs.add_argument("--theta", type=float, default=2.0)
    d_gibbs.add_argument("--iters", type=int, default=20000)
    d_gibbs.add_argument("--burn-in", type=int, default=2000)
    d_gibbs.add_argument("--thin", type=int, default=10)

    d_gibbsl = dev_sub.add_parser("gibbs-linear", help="exact-conditional sampler (weights)")
    _add_data_flags(d_gibbsl)
    _add_common_flags(d_gibbsl)
    d_gibbsl.add_argument("--iters", type=int, default=20000)
    d_gibbsl.add_argument("--burn-in", type=int, default=2000)
    d_gibbsl.add_argument("--thin", type=int, default=10)

    d_gig = dev_sub.add_parser("gig", help="latent-scale distribution summaries")
    _add_common_flags(d_gig)
    d_gig.add_argument("--alpha", type=float, required=True)
    d_gig.add_argument("--samples", type=int, default=100000)

    return parser


def _merge_config(args, parser, argv):
    """Apply --config JSON defaults beneath explicitly-passed flags."""
    if args.config is None:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            overrides = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(overrides, dict):
        raise InputError("config file must hold a JSON object")
    # re-parse with config values as defaults so explicit flags still win
    merged = dict(vars(args))
    explicit = _explicit_dests(parser, argv)
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in merged:
            raise InputError(f"config file sets unknown option {key!r}")
        if dest not in explicit:
            merged[dest] = value
    return argparse.Namespace(**merged)


def _explicit_dests(parser, argv) -> set:
    """Dests of options literally present on the command line."""
    explicit = set()
    # collect option-string -> dest over the whole parser tree
    actions = {}

    def _collect(p):
        for action in p._actions:
            for opt in action.option_strings:
                actions[opt] = action.dest
            if isinstance(action, argparse._SubParsersAction):
                for child in action.choices.values():
                    _collect(child)

    _collect(parser)
    for token in argv:
        opt = token.split("=", 1)[0]
        if opt in actions:
            explicit.add(actions[opt])
    return explicit


def _limit_threads(n):
    if n is None:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=int(n))
    except ImportError:
        _log("threadpoolctl not installed; --threads ignored")


def _load_dataset(args):
    name = args.data
    if name in ("breast-cancer", "heart", "waveform", "susy"):
        return load_benchmark(name, data_dir=args.data_dir, seed=args.seed)
    if getattr(args, "sparse", False):
        return load_sparse_text(name)
    label_col = args.label_col
    try:
        label_col = int(label_col)
    except (TypeError, ValueError):
        pass
    return load_csv(name, label_col=label_col)


def _kernel_from_args(args) -> KernelConfig:
    if args.kernel == "rbf":
        return KernelConfig.rbf(theta=args.theta, jitter=args.jitter)
    if args.kernel == "sqexp":
        return KernelConfig.sqexp(theta=args.theta, jitter=args.jitter)
    return KernelConfig.linear(jitter=args.jitter)


def _train_config_from_args(args, auto_tune=None) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch, max_epochs=args.epochs, lr_tau=args.lr_tau,
        lr_exponent=args.lr_exponent, tol=args.tol, seed=args.seed,
        track_elbo=True, average_tail=args.average_tail,
        auto_tune=args.auto_tune if auto_tune is None else auto_tune,
        tune_interval=args.tune_interval,
        tune_step_size=args.tune_step_size,
    )


def _write_train_log(path, result) -> None:
    """Per-iteration CSV: iteration, elapsed ms, stochastic ELBO, step size,
    then one column per tuned hyperparameter (blank when untouched)."""
    hyper_at = {t: vals for t, vals, _ in getattr(result, "hyper_trace", [])}
    names = sorted({k for vals in hyper_at.values() for k in vals})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "elapsed_ms", "elbo_estimate", "rho"]
                        + names)
        for row in result.history:
            t, ms, est, rho = row
            extra = [hyper_at.get(t, {}).get(k, "") for k in names]
            writer.writerow([t, f"{ms:.3f}", f"{est:.10g}", f"{rho:.10g}"]
                            + extra)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def cmd_train(args) -> int:
    data = _load_dataset(args)
    _log(f"loaded {data.n} points, {data.d} features")
    outcome = train_model(
        data.x, data.y,
        kernel=None if args.linear else _kernel_from_args(args),
        train=_train_config_from_args(args),
        inducing=args.inducing, num_inducing=args.num_inducing,
        standardize=not args.no_standardize, link=args.link,
        linear=args.linear, batch_mode=args.batch_mode, seed=args.seed,
    )
    save_model(outcome.model, args.model_out)
    if args.log_out:
        _write_train_log(args.log_out, outcome.result)
        _log(f"iteration log written to {args.log_out}")
    _log(f"training loop took {outcome.fit_seconds:.3f}s")
    train_pred = outcome.model.predict(data.x)
    err = error_rate(train_pred.prob, data.y)
    print(json.dumps({
        "model": args.model_out,
        "n": data.n,
        "train_error": err,
        "fit_seconds": outcome.fit_seconds,
        "converged": bool(getattr(outcome.result, "converged", False)),
    }))
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    data = _load_dataset(args)
    pred = model.predict(data.x)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["id", "latent_mean", "latent_var", "probability",
                         "label"])
        decisions = pred.decisions()
        for i in range(len(pred.mean)):
            writer.writerow([i, f"{pred.mean[i]:.10g}", f"{pred.var[i]:.10g}",
                             f"{pred.prob[i]:.10g}", int(decisions[i])])
    finally:
        if args.out:
            out.close()
            _log(f"predictions written to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    data = _load_dataset(args)
    _log(f"loaded {data.n} points, {data.d} features; "
         f"{args.folds}-fold cross-validation")
    report = cross_validate(
        data, k=args.folds, seed=args.seed,
        kernel=None if args.linear else _kernel_from_args(args),
        train=_train_config_from_args(args),
        inducing=args.inducing, num_inducing=args.num_inducing,
        standardize=not args.no_standardize, link=args.link,
        linear=args.linear, batch_mode=args.batch_mode,
    )
    print(str(report))
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        _log(f"report written to {args.json_out}")
    return 0


def cmd_tune(args) -> int:
    data = _load_dataset(args)
    if args.linear or args.kernel == "linear":
        raise InputError("tune requires a kernel with hyperparameters")
    outcome = tune_theta(
        data.x, data.y, kernel=_kernel_from_args(args),
        train=_train_config_from_args(args, auto_tune=True), seed=args.seed,
        tune_interval=args.tune_interval,
        tune_step_size=args.tune_step_size,
        inducing=args.inducing, num_inducing=args.num_inducing,
        standardize=not args.no_standardize, link=args.link,
    )
    config = outcome.model.config
    tuned = {p: config.get(p) for p in config.hyperparameter_ids()}
    if args.model_out:
        save_model(outcome.model, args.model_out)
        _log(f"model written to {args.model_out}")
    if args.log_out:
        with open(args.log_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            names = sorted(tuned)
            writer.writerow(["iteration"] + names + ["elbo"])
            for t, vals, value in outcome.result.hyper_trace:
                writer.writerow([t] + [f"{vals[k]:.10g}" for k in names]
                                + [f"{value:.10g}"])
        _log(f"tuning log written to {args.log_out}")
    print(json.dumps({"tuned": tuned, "fit_seconds": outcome.fit_seconds,
                      "steps": len(outcome.result.hyper_trace)}))
    return 0


def cmd_dev(args) -> int:
    if args.dev_command == "gig":
        rng = np.random.default_rng(args.seed)
        from .gig import e_inv_lambda, e_lambda, sample

        draws = sample(args.alpha, rng, size=args.samples)
        print(json.dumps({
            "alpha": args.alpha,
            "mean": float(np.mean(draws)),
            "analytic_mean": e_lambda(args.alpha),
            "inv_mean": float(np.mean(1.0 / draws)),
            "analytic_inv_mean": e_inv_lambda(args.alpha),
            "quadrature_mean": quad_gig_moment(1, args.alpha),
        }))
        return 0

    data = _load_dataset(args)
    if args.dev_command == "gibbs":
        kernel = (KernelConfig.rbf(theta=args.theta) if args.kernel == "rbf"
                  else KernelConfig.sqexp(theta=args.theta)
                  if args.kernel == "sqexp" else KernelConfig.linear())
        result = gibbs_nonlinear(data.x, data.y, kernel, n_iters=args.iters,
                                 burn_in=args.burn_in, thin=args.thin,
                                 seed=args.seed)
    else:
        result = gibbs_linear(data.x, data.y, n_iters=args.iters,
                              burn_in=args.burn_in, thin=args.thin,
                              seed=args.seed)
    print(json.dumps(sample_summary(result)))
    return 0


_COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "cross-validate": cmd_evaluate,
    "tune": cmd_tune,
    "dev": cmd_dev,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args, parser, argv)
        _limit_threads(getattr(args, "threads", None))
        return _COMMANDS[args.command](args)
    except InputError as exc:
        _log(f"error: {exc}")
        return 1
    except NumericalError as exc:
        _log(f"numerical failure: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end training and evaluation flows shared by the CLI and tests.

``train_model`` owns the standardize → select inducing points → fit →
bundle sequence and returns both the persistable model and the raw fit
result (for logs and diagnostics).  ``cross_validate`` runs the k-fold
protocol and reports per-fold metrics with wall-clock timings, where
``fit_seconds`` counts only the training loop, not data preparation.
``tune_theta`` and ``grid_search_theta`` are the two routes to kernel
hyperparameters: gradient ascent on the fitted ELBO versus brute-force
cross-validated search.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import Dataset, StandardizeParams, make_cv, standardize_apply, standardize_fit
from .exceptions import InputError
from .inducing import select_kmeans, select_random
from .kernels import KernelConfig
from .linear import fit_linear_svi
from .nonlinear import TrainConfig, fit_batch, fit_svi
from .prediction import EvalReport, auc_score, brier_score, error_rate
from .serialize import LinearPrimalModel, SparseGPModel

__all__ = [
    "TrainOutcome",
    "default_train_config",
    "train_model",
    "cross_validate",
    "tune_theta",
    "grid_search_theta",
]

INDUCING_METHODS = ("kmeans", "random")


@dataclass
class TrainOutcome:
    """A trained model plus the fit diagnostics behind it."""

    model: object
    result: object
    fit_seconds: float


def default_train_config(seed: int = 0, batch_size: int = 10,
                         max_epochs: int = 80) -> TrainConfig:
    """Practical stochastic-training defaults for dataset-scale runs.

    A fast-decaying step size with iterate averaging over the second
    half of the run gives low-variance final states without per-problem
    tuning.
    """
    return TrainConfig(batch_size=batch_size, max_epochs=max_epochs,
                       tol=0.0, track_elbo=False, seed=seed,
                       lr_tau=1.0, lr_exponent=0.75, average_tail=0.5)


def _resolve_inducing(x, inducing, num_inducing, seed):
    if isinstance(inducing, np.ndarray):
        return np.asarray(inducing, dtype=float)
    if num_inducing is None:
        num_inducing = max(1, int(round(0.2 * len(x))))
    num_inducing = min(num_inducing, len(x))
    if inducing == "kmeans":
        return select_kmeans(x, num_inducing, seed=seed).z
    if inducing == "random":
        return select_random(x, num_inducing, seed=seed).z
    raise InputError(
        f"unknown inducing method {inducing!r}; "
        f"expected one of {INDUCING_METHODS} or an explicit array"
    )


def train_model(x, y, *, kernel: Optional[KernelConfig] = None,
                train: Optional[TrainConfig] = None,
                inducing="kmeans", num_inducing: Optional[int] = None,
                standardize: bool = True, link: str = "sqrt",
                linear: bool = False, prior_sigma=None,
                batch_mode: bool = False, seed: int = 0) -> TrainOutcome:
    """Standardize, pick inducing points, fit, and bundle a model.

    ``linear=True`` trains the primal-space linear model (no kernel or
    inducing points); ``batch_mode=True`` uses full-batch coordinate
    ascent instead of stochastic steps for the nonlinear model.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    params: Optional[StandardizeParams] = None
    if standardize:
        params = standardize_fit(x)
        x = standardize_apply(params, x)
    if train is None:
        train = default_train_config(seed=seed)

    if linear:
        t0 = time.perf_counter()
        result = fit_linear_svi(x, y, train, sigma=prior_sigma)
        fit_seconds = time.perf_counter() - t0
        model = LinearPrimalModel(mu=result.state.mu, zeta=result.state.zeta,
                                  sigma=result.state.sigma, link=link,
                                  standardize=params)
        return TrainOutcome(model=model, result=result,
                            fit_seconds=fit_seconds)

    if kernel is None:
        kernel = KernelConfig.rbf(theta=2.0)
    z = _resolve_inducing(x, inducing, num_inducing, seed)
    t0 = time.perf_counter()
    if batch_mode:
        result = fit_batch(x, y, kernel, z=z)
    else:
        result = fit_svi(x, y, kernel, train, z)
    fit_seconds = time.perf_counter() - t0
    config = result.workspace.config  # may differ from input when tuning
    model = SparseGPModel(config=config, z=z, mu=result.state.mu,
                          zeta=result.state.zeta, link=link,
                          standardize=params)
    return TrainOutcome(model=model, result=result, fit_seconds=fit_seconds)


def cross_validate(data: Dataset, k: int = 10, *, seed: int = 0,
                   **train_kwargs) -> EvalReport:
    """Stratified k-fold evaluation; returns per-fold metrics and timings.

    Keyword arguments are forwarded to :func:`train_model`.  Each fold
    standardizes with its own training statistics.
    """
    plan = make_cv(data.y, k=k, seed=seed)
    errs, briers, aucs, fit_secs = [], [], [], []
    t0 = time.perf_counter()
    for train_idx, test_idx in plan.folds():
        outcome = train_model(data.x[train_idx], data.y[train_idx],
                              seed=seed, **train_kwargs)
        pred = outcome.model.predict(data.x[test_idx])
        y_test = data.y[test_idx]
        errs.append(error_rate(pred.prob, y_test))
        briers.append(brier_score(pred.prob, y_test))
        aucs.append(auc_score(pred.prob, y_test))
        fit_secs.append(outcome.fit_seconds)
    total = time.perf_counter() - t0
    return EvalReport(error_rates=errs, briers=briers, aucs=aucs,
                      fit_seconds=fit_secs, n_folds=k, total_seconds=total)


def tune_theta(x, y, *, kernel: Optional[KernelConfig] = None,
               train: Optional[TrainConfig] = None, seed: int = 0,
               tune_interval: int = 10, tune_step_size: float = 0.1,
               **train_kwargs) -> TrainOutcome:
    """Fit with interleaved gradient-ascent hyperparameter updates.

    Returns the outcome of a single training run whose kernel
    hyperparameters were adapted on the fly; the tuned values live in
    ``outcome.model.config`` and the trajectory in
    ``outcome.result.hyper_trace``.
    """
    if train is None:
        train = default_train_config(seed=seed)
    train = dataclasses.replace(train, auto_tune=True,
                                tune_interval=tune_interval,
                                tune_step_size=tune_step_size)
    return train_model(x, y, kernel=kernel, train=train, seed=seed,
                       **train_kwargs)


def grid_search_theta(data: Dataset, thetas: Sequence[float], k: int = 10,
                      *, seed: int = 0, kernel_family: str = "rbf",
                      **train_kwargs) -> dict:
    """Cross-validated search over a grid of kernel length scales.

    Returns a dict with the grid, per-theta mean CV error and Brier
    score, the minimizer, and the total wall time.
    """
    if len(thetas) == 0:
        raise InputError("theta grid is empty")
    if kernel_family == "rbf":
        make_kernel = KernelConfig.rbf
    elif kernel_family == "sqexp":
        make_kernel = KernelConfig.sqexp
    else:
        raise InputError(f"grid search supports rbf/sqexp, not {kernel_family!r}")
    losses, briers = [], []
    t0 = time.perf_counter()
    for theta in thetas:
        report = cross_validate(data, k=k, seed=seed,
                                kernel=make_kernel(theta=theta),
                                **train_kwargs)
        losses.append(float(np.mean(report.error_rates)))
        briers.append(float(np.mean(report.briers)))
    elapsed = time.perf_counter() - t0
    best = int(np.argmin(losses))
    return {
        "thetas": list(map(float, thetas)),
        "cv_errors": losses,
        "cv_briers": briers,
        "best_theta": float(thetas[best]),
        "best_error": losses[best],
        "elapsed_seconds": elapsed,
    }

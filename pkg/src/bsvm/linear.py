"""Variational inference for the linear max-margin classifier.

Weight-space counterpart of the sparse GP model: the latent score is
f_i = x_i' beta with prior beta ~ N(0, Sigma), and the same hinge
pseudolikelihood and lambda augmentation yield the variational posterior
q(beta) = N(mu, zeta), q(lambda_i) = GIG(1/2, 1, alpha_i) with optima

    alpha_i = (1 - y_i x_i' mu)^2 + x_i' zeta x_i,
    zeta    = (X' A^{-1/2} X + Sigma^{-1})^{-1},
    mu      = zeta sum_i y_i x_i (alpha_i^{-1/2} + 1),

where A^{-1/2} = diag(alpha^{-1/2}).  Cost per update is O(n d^2 + d^3);
no n x n matrices are ever formed.  The stochastic fitter runs the same
natural-parameter averaging as the sparse model, so with batch size n and
step size 1 it reproduces the deterministic fixed-point iteration above
sweep for sweep.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular, LinAlgError

from . import gig
from .exceptions import InputError, NumericalError, NumericalWarning
from .nonlinear import TrainConfig, _check_labels

__all__ = [
    "LinearState",
    "LinearFitResult",
    "elbo_linear",
    "fit_linear_svi",
    "predict_linear",
]


@dataclass
class LinearState:
    """Variational parameters of the linear model."""

    mu: np.ndarray      # (d,)
    zeta: np.ndarray    # (d, d) symmetric positive definite
    alpha: np.ndarray   # (n,)
    sigma: np.ndarray   # (d, d) prior covariance the state was fitted under


@dataclass
class LinearFitResult:
    state: LinearState
    elbo_trace: np.ndarray
    converged: bool
    n_iter: int
    history: list = field(default_factory=list)


def _check_inputs(x, y):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError("x must be a non-empty 2-D array")
    if not np.all(np.isfinite(x)):
        raise InputError("x contains non-finite values")
    y = _check_labels(y, x.shape[0])
    return x, y


def _prior_factors(sigma, d: int):
    """Return (sigma, chol(sigma), chol of sigma^{-1}) with validation."""
    if sigma is None:
        sigma = np.eye(d)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (d, d):
        raise InputError(f"sigma must be {d} x {d}")
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise InputError("sigma must be symmetric")
    try:
        ls = cholesky(sigma, lower=True)
    except LinAlgError:
        raise InputError("sigma must be positive definite") from None
    inv = cho_solve((ls, True), np.eye(d))
    inv = 0.5 * (inv + inv.T)
    inv_chol = cholesky(inv, lower=True)
    return sigma, ls, inv, inv_chol


def elbo_linear(state: LinearState, x, y, sigma=None) -> float:
    """Evidence lower bound of the linear model (same constants as the
    sparse model's bound: only an additive constant per point is dropped)."""
    x, y = _check_inputs(x, y)
    d = x.shape[1]
    sigma, ls, sig_inv, _ = _prior_factors(
        state.sigma if sigma is None else sigma, d)
    mu, zeta, alpha = state.mu, state.zeta, state.alpha
    try:
        lz = cholesky(zeta, lower=True)
    except LinAlgError:
        raise NumericalError("zeta is not positive definite") from None
    logdet_zeta = 2.0 * float(np.sum(np.log(np.diag(lz))))
    logdet_sigma = 2.0 * float(np.sum(np.log(np.diag(ls))))
    a = solve_triangular(ls, lz, lower=True)
    trace = float(np.sum(a * a))
    b = solve_triangular(ls, mu, lower=True)
    quad = float(b @ b)

    xmu = x @ mu
    qvar = np.einsum("ij,ij->i", x @ zeta, x)
    v = (1.0 - y * xmu) ** 2 + qvar
    sa = np.sqrt(alpha)
    data = float(np.sum(
        y * xmu + 0.25 * np.log(alpha) + gig.log_bessel_half(sa)
        + 0.5 * sa - v / (2.0 * sa)
    ))
    value = (0.5 * logdet_zeta - 0.5 * logdet_sigma + 0.5 * d
             - 0.5 * trace - 0.5 * quad + data)
    if not np.isfinite(value):
        raise NumericalError("ELBO is not finite")
    return value


def fit_linear_svi(x, y, train: TrainConfig, sigma=None) -> LinearFitResult:
    """Stochastic natural-gradient fit of the linear model.

    Minibatch sums are rescaled by n / |batch|; with ``batch_size >= n``
    and a schedule pinned at 1 each iteration is one exact sweep of the
    fixed-point updates.
    """
    x, y = _check_inputs(x, y)
    n, d = x.shape
    sigma, _, sig_inv, sig_inv_chol = _prior_factors(sigma, d)
    rng = np.random.default_rng(train.seed)
    schedule = train.make_schedule()

    eta1 = np.zeros(d)
    eta2 = -0.5 * sig_inv.copy()
    alpha = np.ones(n)
    eye = np.eye(d)
    s_size = min(train.batch_size, n)

    avg_from = None
    if train.average_tail > 0.0:
        iters_per_epoch = -(-n // s_size)
        planned = train.max_epochs * iters_per_epoch
        avg_from = max(1, planned - int(train.average_tail * planned) + 1)
        acc1 = np.zeros(d)
        acc2 = np.zeros((d, d))
        acc_count = 0

    history = []
    trace = []
    window_prev = None
    window_accum = []
    converged = False
    t = 0
    t_start = time.perf_counter()

    for _epoch in range(train.max_epochs):
        # a single full batch needs no shuffling, and unshuffled sweeps keep
        # the rho = 1 path aligned with the deterministic fixed-point updates
        perm = np.arange(n) if s_size == n else rng.permutation(n)
        for lo in range(0, n, s_size):
            batch = perm[lo:lo + s_size]
            t += 1
            rho = schedule(t)

            try:
                f_chol = cholesky(-2.0 * eta2, lower=True)
            except LinAlgError:
                raise NumericalError(
                    f"natural precision lost definiteness at iteration {t}"
                ) from None
            mu = cho_solve((f_chol, True), eta1)
            x_b = x[batch]
            g = cho_solve((f_chol, True), x_b.T)       # zeta x_b'
            xmu_b = x_b @ mu
            qvar_b = np.einsum("ij,ji->i", x_b, g)
            y_b = y[batch]
            v_b = (1.0 - y_b * xmu_b) ** 2 + qvar_b
            alpha[batch] = gig.clamp_alpha(v_b)
            s = alpha[batch] ** -0.5
            scale = n / len(batch)

            target1 = scale * (x_b.T @ (y_b * (s + 1.0)))
            target2 = -0.5 * (sig_inv + scale * (x_b.T @ (s[:, None] * x_b)))
            eta1 = (1.0 - rho) * eta1 + rho * target1
            eta2 = (1.0 - rho) * eta2 + rho * target2

            if avg_from is not None and t >= avg_from:
                acc1 += eta1
                acc2 += eta2
                acc_count += 1

            if train.track_elbo:
                logdet_zeta = -2.0 * float(np.sum(np.log(np.diag(f_chol))))
                logdet_sigma = -2.0 * float(
                    np.sum(np.log(np.diag(sig_inv_chol))))
                sq = solve_triangular(f_chol, sig_inv_chol, lower=True)
                tr = float(np.sum(sq * sq))
                b = sig_inv_chol.T @ mu
                quad = float(b @ b)
                sa = np.sqrt(alpha[batch])
                data = float(np.sum(
                    y_b * xmu_b + 0.25 * np.log(alpha[batch])
                    + gig.log_bessel_half(sa) + 0.5 * sa - v_b / (2.0 * sa)
                ))
                est = (0.5 * logdet_zeta - 0.5 * logdet_sigma + 0.5 * d
                       - 0.5 * tr - 0.5 * quad + scale * data)
                if not np.isfinite(est):
                    raise NumericalError(
                        f"stochastic ELBO diverged at iteration {t}"
                    )
                trace.append(est)
                elapsed_ms = (time.perf_counter() - t_start) * 1e3
                history.append((t, elapsed_ms, est, rho))
                window_accum.append(est)
                if len(window_accum) == train.window:
                    cur = float(np.mean(window_accum))
                    window_accum = []
                    if (window_prev is not None and train.tol > 0.0
                            and abs(cur - window_prev)
                            <= train.tol * max(1.0, abs(window_prev))):
                        converged = True
                    window_prev = cur
            if converged:
                break
        if converged:
            break

    if avg_from is not None and acc_count > 0:
        eta1 = acc1 / acc_count
        eta2 = acc2 / acc_count
    try:
        f_chol = cholesky(-2.0 * eta2, lower=True)
    except LinAlgError:
        raise NumericalError("final natural precision lost definiteness") from None
    zeta = cho_solve((f_chol, True), eye)
    zeta = 0.5 * (zeta + zeta.T)
    mu = cho_solve((f_chol, True), eta1)
    if not converged and train.tol > 0.0:
        warnings.warn("stochastic fit did not converge within max_epochs",
                      NumericalWarning)
    state = LinearState(mu=mu, zeta=zeta, alpha=alpha, sigma=sigma)
    return LinearFitResult(state=state, elbo_trace=np.asarray(trace),
                           converged=converged, n_iter=t, history=history)


def predict_linear(state: LinearState, x_star, link: str = "sqrt"):
    """Predictive class probabilities of the linear model.

    The latent score at x* is Gaussian with mean x*' mu and variance
    x*' zeta x*; the probability of class +1 squashes it through the
    probit link (see ``prediction.squash`` for the link variants).
    """
    from .prediction import PredictiveDistribution, squash

    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim != 2 or x_star.shape[1] != len(state.mu):
        raise InputError(
            f"x_star must be 2-D with {len(state.mu)} features"
        )
    mean = x_star @ state.mu
    var = np.einsum("ij,ij->i", x_star @ state.zeta, x_star)
    var = np.maximum(var, 0.0)
    return PredictiveDistribution(mean=mean, var=var,
                                  prob=squash(mean, var, link))

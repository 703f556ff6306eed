"""Variational inference for the kernelized max-margin classifier.

The model places a GP prior on the latent score f and uses the hinge
pseudolikelihood L(y_i | f_i) = exp(-2 max(0, 1 - y_i f_i)).  A scale
mixture representation introduces one latent lambda_i per point, and the
variational posterior factorizes as q(u) q(lambda) with

    q(u) = N(mu, zeta)          over inducing values u at points Z,
    q(lambda_i) = GIG(1/2, 1, alpha_i).

With kappa = K_nm K_mm^{-1} and ktilde = diag(K_nn - K_nm K_mm^{-1} K_mn),
the evidence lower bound used throughout this module is

    L = 1/2 log|zeta| - 1/2 log|K_mm| + m/2
        - 1/2 tr(K_mm^{-1} zeta) - 1/2 mu' K_mm^{-1} mu
        + sum_i [ y_i kappa_i mu + 1/4 log alpha_i
                  + log K_{1/2}(sqrt(alpha_i)) + sqrt(alpha_i)/2
                  - v_i / (2 sqrt(alpha_i)) ],

    v_i = (1 - y_i kappa_i mu)^2 + kappa_i zeta kappa_i' + ktilde_i,

which drops only an additive constant per data point.  The optimal
coordinate updates are alpha_i = v_i and, jointly,

    zeta = (K_mm^{-1} + kappa' A^{-1/2} kappa)^{-1},
    mu   = zeta kappa' Y (alpha^{-1/2} + 1),

with A^{-1/2} = diag(alpha^{-1/2}).  ``fit_batch`` iterates these sweeps;
``fit_svi`` performs the same updates stochastically in the natural
parameterization (eta1, eta2) = (zeta^{-1} mu, -1/2 zeta^{-1}) with step
size rho_t, using minibatch sums rescaled by n / |batch| so the noisy
natural gradients are unbiased.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular, LinAlgError

from . import gig
from .exceptions import InputError, NumericalError, NumericalWarning
from .kernels import GramMatrices, KernelConfig, build_gram

__all__ = [
    "SparseGPWorkspace",
    "VariationalState",
    "TrainConfig",
    "FitResult",
    "build_workspace",
    "elbo",
    "elbo_grads_euclidean",
    "natural_grads",
    "update_alpha",
    "fit_batch",
    "fit_svi",
    "robbins_monro",
]


# ----------------------------------------------------------------------
# containers
# ----------------------------------------------------------------------


@dataclass
class SparseGPWorkspace:
    """Input-dependent quantities that stay fixed while (mu, zeta, alpha) move.

    Rebuilt from scratch whenever the kernel hyperparameters change.
    """

    x: np.ndarray
    z: np.ndarray
    config: KernelConfig
    gram: GramMatrices
    kappa: np.ndarray          # (n, m) = K_nm (K_mm + jitter I)^{-1}
    k_mm_inv: np.ndarray       # (m, m) symmetric inverse of the jittered K_mm
    k_mm_inv_chol: np.ndarray  # lower Cholesky factor of k_mm_inv

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.z.shape[0]


def build_workspace(x, y_or_z, config: KernelConfig | None = None, *,
                    z=None) -> SparseGPWorkspace:
    """Assemble the workspace for inputs ``x`` and inducing points ``z``.

    Accepts either ``build_workspace(x, z, config)`` or the keyword form
    ``build_workspace(x, config=config, z=z)``.
    """
    if config is None:
        raise InputError("kernel config is required")
    if z is None:
        z = y_or_z
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    gram = build_gram(x, z, config)
    kappa = gram.solve_mm(gram.k_nm.T).T
    k_mm_inv = gram.solve_mm(np.eye(gram.m))
    k_mm_inv = 0.5 * (k_mm_inv + k_mm_inv.T)
    inv_chol = cholesky(k_mm_inv, lower=True)
    return SparseGPWorkspace(x=x, z=z, config=config, gram=gram, kappa=kappa,
                             k_mm_inv=k_mm_inv, k_mm_inv_chol=inv_chol)


@dataclass
class VariationalState:
    """Variational parameters: q(u) = N(mu, zeta), q(lambda_i) by alpha_i.

    (mu, zeta) is the canonical representation; the natural parameters
    eta1 = zeta^{-1} mu and eta2 = -1/2 zeta^{-1} are derived on demand.
    """

    mu: np.ndarray      # (m,)
    zeta: np.ndarray    # (m, m) symmetric positive definite
    alpha: np.ndarray   # (n,) positive

    def natural_parameters(self) -> tuple[np.ndarray, np.ndarray]:
        lz = _chol(self.zeta, "zeta")
        eta1 = cho_solve((lz, True), self.mu)
        prec = cho_solve((lz, True), np.eye(len(self.mu)))
        prec = 0.5 * (prec + prec.T)
        return eta1, -0.5 * prec

    def validate(self) -> None:
        if self.mu.ndim != 1 or self.zeta.shape != (len(self.mu),) * 2:
            raise InputError("inconsistent variational parameter shapes")
        if np.any(self.alpha <= 0.0):
            raise InputError("alpha must stay positive")
        _chol(self.zeta, "zeta")


def _chol(a: np.ndarray, name: str) -> np.ndarray:
    try:
        return cholesky(a, lower=True)
    except LinAlgError:
        raise NumericalError(f"{name} is not positive definite") from None


@dataclass(frozen=True)
class TrainConfig:
    """Options for the stochastic fitter.

    The default step size schedule is rho_t = (t + lr_tau)^{-lr_exponent},
    which satisfies the usual stochastic approximation conditions for
    lr_exponent in (1/2, 1].  Pass ``schedule`` to override it entirely.
    ``tol`` compares consecutive window means of the stochastic ELBO
    estimate; set it to 0 to disable early stopping.  ``tune_interval``
    is measured in iterations, not epochs.

    ``average_tail`` > 0 enables Polyak-Ruppert iterate averaging: the
    returned (mu, zeta) come from the natural parameters averaged over
    the trailing fraction of the planned iterations (a convex combination
    of positive definite precisions, so definiteness is preserved).  This
    suppresses the stationary minibatch noise of the last iterate and
    pairs best with a slowly decaying schedule (lr_exponent near 0.6).
    """

    num_inducing: int | None = None
    batch_size: int = 10
    max_epochs: int = 100
    lr_tau: float = 10.0
    lr_exponent: float = 0.75
    schedule: Callable[[int], float] | None = None
    tol: float = 1e-4
    window: int = 20
    seed: int = 0
    auto_tune: bool = False
    tune_interval: int = 10
    tune_step_size: float = 0.1
    track_elbo: bool = True
    average_tail: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InputError("batch_size and max_epochs must be >= 1")
        if self.schedule is None and not 0.5 < self.lr_exponent <= 1.0:
            raise InputError("lr_exponent must lie in (1/2, 1]")
        if self.schedule is None and self.lr_tau < 0.0:
            raise InputError("lr_tau must be non-negative")
        if self.tol < 0.0 or self.window < 1:
            raise InputError("tol must be >= 0 and window >= 1")
        if self.auto_tune and self.tune_interval < 1:
            raise InputError("tune_interval must be >= 1")
        if not 0.0 <= self.average_tail <= 1.0:
            raise InputError("average_tail must lie in [0, 1]")

    def make_schedule(self) -> Callable[[int], float]:
        if self.schedule is not None:
            return self.schedule
        tau, expo = self.lr_tau, self.lr_exponent
        return lambda t: float((t + tau) ** -expo)


def robbins_monro(tau: float = 10.0, exponent: float = 0.75):
    """Step size schedule rho_t = (t + tau)^{-exponent}."""
    if not 0.5 < exponent <= 1.0:
        raise InputError("exponent must lie in (1/2, 1]")
    return lambda t: float((t + tau) ** -exponent)


@dataclass
class FitResult:
    """Outcome of a fit: final state plus diagnostics.

    ``elbo_trace`` holds one entry per sweep (batch fitter) or per
    iteration (stochastic fitter, where it is a noisy estimate).
    ``history`` rows are (iteration, elapsed_ms, elbo_estimate, rho) for
    the stochastic fitter.  ``hyper_trace`` rows are (iteration, values
    dict, elbo) recorded at each accepted hyperparameter step.
    """

    state: VariationalState
    workspace: SparseGPWorkspace
    config: KernelConfig
    elbo_trace: np.ndarray
    converged: bool
    n_iter: int
    history: list = field(default_factory=list)
    hyper_trace: list = field(default_factory=list)


# ----------------------------------------------------------------------
# validation helpers
# ----------------------------------------------------------------------


def _check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != n:
        raise InputError(f"expected {n} labels, got {len(y)}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("labels must be -1 or +1")
    return y


def _check_batch(batch, n: int) -> np.ndarray:
    if batch is None:
        return np.arange(n)
    batch = np.asarray(batch, dtype=int).ravel()
    if len(batch) == 0:
        raise InputError("minibatch must be non-empty")
    if np.any(batch < 0) or np.any(batch >= n):
        raise InputError("minibatch indices out of range")
    return batch


# ----------------------------------------------------------------------
# objective and gradients
# ----------------------------------------------------------------------


def _latent_moments(mu, zeta, ws: SparseGPWorkspace, batch=None):
    """Mean and variance of f_i under q for the requested rows."""
    kap = ws.kappa if batch is None else ws.kappa[batch]
    ktd = ws.gram.ktilde_diag if batch is None else ws.gram.ktilde_diag[batch]
    kmu = kap @ mu
    qvar = np.einsum("ij,ij->i", kap @ zeta, kap)
    return kmu, qvar + ktd


def _margin_second_moment(mu, zeta, ws, y, batch=None):
    """v_i = E_q[(1 - y_i f_i)^2] for the requested rows."""
    yb = y if batch is None else y[batch]
    kmu, fvar = _latent_moments(mu, zeta, ws, batch)
    return (1.0 - yb * kmu) ** 2 + fvar, kmu


def elbo(state: VariationalState, ws: SparseGPWorkspace, y) -> float:
    """Evidence lower bound at ``state`` (up to a constant per data point)."""
    y = _check_labels(y, ws.n)
    mu, zeta, alpha = state.mu, state.zeta, state.alpha
    lz = _chol(zeta, "zeta")
    logdet_zeta = 2.0 * float(np.sum(np.log(np.diag(lz))))
    # tr(K^{-1} zeta) = ||L_k^{-1} L_z||_F^2 for K = L_k L_k', zeta = L_z L_z'
    lk = ws.gram.chol_mm
    a = solve_triangular(lk, lz, lower=True)
    trace = float(np.sum(a * a))
    b = solve_triangular(lk, mu, lower=True)
    quad = float(b @ b)
    m = ws.m

    v, kmu = _margin_second_moment(mu, zeta, ws, y)
    sa = np.sqrt(alpha)
    data = float(np.sum(
        y * kmu + 0.25 * np.log(alpha) + gig.log_bessel_half(sa)
        + 0.5 * sa - v / (2.0 * sa)
    ))
    value = (0.5 * logdet_zeta - 0.5 * ws.gram.logdet_mm + 0.5 * m
             - 0.5 * trace - 0.5 * quad + data)
    if not np.isfinite(value):
        raise NumericalError("ELBO is not finite")
    return value


def elbo_grads_euclidean(state: VariationalState, ws: SparseGPWorkspace, y):
    """Gradients of the ELBO with respect to (mu, zeta, alpha).

    The zeta gradient treats zeta as an unconstrained square matrix; on
    the symmetric subspace the directional derivative along a symmetric
    perturbation D is tr(grad' D).
    """
    y = _check_labels(y, ws.n)
    mu, zeta, alpha = state.mu, state.zeta, state.alpha
    s = alpha ** -0.5
    kap = ws.kappa
    w = kap.T @ (s[:, None] * kap)
    prec = ws.k_mm_inv + w

    g_mu = kap.T @ (y * (s + 1.0)) - prec @ mu

    lz = _chol(zeta, "zeta")
    zeta_inv = cho_solve((lz, True), np.eye(ws.m))
    zeta_inv = 0.5 * (zeta_inv + zeta_inv.T)
    g_zeta = 0.5 * (zeta_inv - prec)

    v, _ = _margin_second_moment(mu, zeta, ws, y)
    g_alpha = v / (4.0 * alpha**1.5) - 1.0 / (4.0 * np.sqrt(alpha))
    return g_mu, g_zeta, g_alpha


def natural_grads(state: VariationalState, ws: SparseGPWorkspace, y,
                  batch=None):
    """Natural gradient of the ELBO in (eta1, eta2).

    For a minibatch the data sums are rescaled by n / |batch|, which makes
    the result an unbiased estimate of the full natural gradient when
    batches are drawn uniformly.
    """
    y = _check_labels(y, ws.n)
    batch = _check_batch(batch, ws.n)
    scale = ws.n / len(batch)
    kap = ws.kappa[batch]
    s = state.alpha[batch] ** -0.5
    yb = y[batch]

    target1 = scale * (kap.T @ (yb * (s + 1.0)))
    target2 = -0.5 * (ws.k_mm_inv + scale * (kap.T @ (s[:, None] * kap)))

    eta1, eta2 = state.natural_parameters()
    return target1 - eta1, target2 - eta2


def update_alpha(state: VariationalState, ws: SparseGPWorkspace, y,
                 batch=None) -> np.ndarray:
    """Optimal alpha_i = E_q[(1 - y_i f_i)^2] for the requested rows.

    Returns a full-length copy of alpha with only the batch entries
    replaced.
    """
    y = _check_labels(y, ws.n)
    batch = _check_batch(batch, ws.n)
    v, _ = _margin_second_moment(state.mu, state.zeta, ws, y, batch)
    out = np.array(state.alpha, dtype=float, copy=True)
    out[batch] = gig.clamp_alpha(v)
    return out


# ----------------------------------------------------------------------
# batch coordinate ascent
# ----------------------------------------------------------------------


def fit_batch(x, y, config: KernelConfig, z=None, *, max_sweeps: int = 200,
              tol: float = 1e-10) -> FitResult:
    """Full-batch coordinate ascent on the ELBO.

    Each sweep sets alpha to its optimum given (mu, zeta), then (zeta, mu)
    to their joint optimum given alpha, so the ELBO is non-decreasing
    across sweeps.  With ``z=None`` the inducing points are the inputs
    themselves and the bound is tight at the optimum of the full model.

    The covariance is carried as the Cholesky factor of its precision
    K_mm^{-1} + kappa' A^{-1/2} kappa between sweeps; zeta is only
    materialized for the ELBO evaluations and the returned state.
    """
    x = np.asarray(x, dtype=float)
    if z is None:
        z = x
    ws = build_workspace(x, z, config)
    y = _check_labels(y, ws.n)
    kap = ws.kappa
    eye = np.eye(ws.m)

    mu = np.zeros(ws.m)
    lp = ws.k_mm_inv_chol           # precision of the prior init zeta = K_mm
    alpha = np.ones(ws.n)

    trace = []
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        g = cho_solve((lp, True), kap.T)          # zeta kappa'
        kmu = kap @ mu
        qvar = np.einsum("ij,ji->i", kap, g)
        v = (1.0 - y * kmu) ** 2 + qvar + ws.gram.ktilde_diag
        alpha = gig.clamp_alpha(v)
        s = alpha ** -0.5
        prec = ws.k_mm_inv + kap.T @ (s[:, None] * kap)
        lp = _chol(prec, "variational precision")
        mu = cho_solve((lp, True), kap.T @ (y * (s + 1.0)))
        zeta = cho_solve((lp, True), eye)
        zeta = 0.5 * (zeta + zeta.T)
        value = elbo(VariationalState(mu, zeta, alpha), ws, y)
        trace.append(value)
        if (tol > 0.0 and len(trace) > 1
                and abs(trace[-1] - trace[-2]) <= tol * max(1.0, abs(trace[-2]))):
            converged = True
            break

    if not converged and tol > 0.0 and max_sweeps > 1:
        warnings.warn("batch fit did not converge within max_sweeps",
                      NumericalWarning)
    zeta = cho_solve((lp, True), eye)
    zeta = 0.5 * (zeta + zeta.T)
    state = VariationalState(mu=mu, zeta=zeta, alpha=alpha)
    return FitResult(state=state, workspace=ws, config=config,
                     elbo_trace=np.asarray(trace), converged=converged,
                     n_iter=sweeps)


# ----------------------------------------------------------------------
# stochastic fitter in natural parameters
# ----------------------------------------------------------------------


def _stochastic_elbo(ws, f_chol, mu, kmu_b, v_b, alpha_b, y_b, scale) -> float:
    """ELBO estimate at the current state from minibatch quantities.

    Global terms are exact; data terms are the minibatch sum rescaled by
    n / |batch|.
    """
    logdet_zeta = -2.0 * float(np.sum(np.log(np.diag(f_chol))))
    sq = solve_triangular(f_chol, ws.k_mm_inv_chol, lower=True)
    trace = float(np.sum(sq * sq))
    b = ws.k_mm_inv_chol.T @ mu
    quad = float(b @ b)
    sa = np.sqrt(alpha_b)
    data = float(np.sum(
        y_b * kmu_b + 0.25 * np.log(alpha_b) + gig.log_bessel_half(sa)
        + 0.5 * sa - v_b / (2.0 * sa)
    ))
    return (0.5 * logdet_zeta - 0.5 * ws.gram.logdet_mm + 0.5 * ws.m
            - 0.5 * trace - 0.5 * quad + scale * data)


def fit_svi(x, y, config: KernelConfig, train: TrainConfig, z) -> FitResult:
    """Stochastic variational inference with natural gradient steps.

    Follows the natural parameterization throughout: each iteration
    refreshes alpha on the minibatch at the current (mu, zeta), forms the
    rescaled minibatch natural gradient target, and blends

        eta <- (1 - rho_t) eta + rho_t eta_hat.

    With ``batch_size >= n`` and a schedule pinned at rho = 1 this
    reproduces ``fit_batch`` sweep by sweep.
    """
    x = np.asarray(x, dtype=float)
    ws = build_workspace(x, z, config)
    n, m = ws.n, ws.m
    y = _check_labels(y, n)
    rng = np.random.default_rng(train.seed)
    schedule = train.make_schedule()

    eta1 = np.zeros(m)
    eta2 = -0.5 * ws.k_mm_inv.copy()
    alpha = np.ones(n)
    eye = np.eye(m)
    s_size = min(train.batch_size, n)

    avg_from = None
    if train.average_tail > 0.0:
        iters_per_epoch = -(-n // s_size)
        planned = train.max_epochs * iters_per_epoch
        avg_from = max(1, planned - int(train.average_tail * planned) + 1)
        acc1 = np.zeros(m)
        acc2 = np.zeros((m, m))
        acc_count = 0

    history = []
    hyper_trace = []
    trace = []
    window_prev = None
    window_accum = []
    converged = False
    t = 0
    t_start = time.perf_counter()

    for _epoch in range(train.max_epochs):
        # a single full batch needs no shuffling (and keeps the rho = 1
        # full-batch path arithmetically identical to fit_batch)
        perm = np.arange(n) if s_size == n else rng.permutation(n)
        for lo in range(0, n, s_size):
            batch = perm[lo:lo + s_size]
            t += 1
            rho = schedule(t)

            f_chol = _chol(-2.0 * eta2, "natural precision")
            mu = cho_solve((f_chol, True), eta1)
            kap_b = ws.kappa[batch]
            g = cho_solve((f_chol, True), kap_b.T)     # zeta kappa_b'
            kmu_b = kap_b @ mu
            qvar_b = np.einsum("ij,ji->i", kap_b, g)
            y_b = y[batch]
            v_b = ((1.0 - y_b * kmu_b) ** 2 + qvar_b
                   + ws.gram.ktilde_diag[batch])
            alpha[batch] = gig.clamp_alpha(v_b)
            s = alpha[batch] ** -0.5
            scale = n / len(batch)

            target1 = scale * (kap_b.T @ (y_b * (s + 1.0)))
            target2 = -0.5 * (ws.k_mm_inv + scale * (kap_b.T @ (s[:, None] * kap_b)))
            eta1 = (1.0 - rho) * eta1 + rho * target1
            eta2 = (1.0 - rho) * eta2 + rho * target2

            if avg_from is not None and t >= avg_from:
                acc1 += eta1
                acc2 += eta2
                acc_count += 1

            if train.track_elbo:
                est = _stochastic_elbo(ws, f_chol, mu, kmu_b, v_b,
                                       alpha[batch], y_b, scale)
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

            if train.auto_tune and t % train.tune_interval == 0:
                from .tuning import tune_step

                zeta = cho_solve((f_chol, True), eye)
                zeta = 0.5 * (zeta + zeta.T)
                mu_full = cho_solve((f_chol, True), eta1)
                state = VariationalState(mu_full, zeta, alpha)
                step = tune_step(state, ws, y, step_size=train.tune_step_size)
                if step.accepted:
                    ws = step.workspace
                    hyper_trace.append((
                        t,
                        {p: ws.config.get(p)
                         for p in ws.config.hyperparameter_ids()},
                        step.elbo,
                    ))

            if converged:
                break
        if converged:
            break

    if avg_from is not None and acc_count > 0:
        eta1 = acc1 / acc_count
        eta2 = acc2 / acc_count
    f_chol = _chol(-2.0 * eta2, "natural precision")
    zeta = cho_solve((f_chol, True), eye)
    zeta = 0.5 * (zeta + zeta.T)
    mu = cho_solve((f_chol, True), eta1)
    state = VariationalState(mu=mu, zeta=zeta, alpha=alpha)
    if not converged and train.tol > 0.0:
        warnings.warn("stochastic fit did not converge within max_epochs",
                      NumericalWarning)
    return FitResult(state=state, workspace=ws, config=ws.config,
                     elbo_trace=np.asarray(trace), converged=converged,
                     n_iter=t, history=history, hyper_trace=hyper_trace)

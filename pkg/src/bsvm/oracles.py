"""Slow, independent reference implementations used to validate the fast
closed forms: numerical quadrature for the latent-scale distribution,
finite differences for gradients, and MCMC / rejection samplers for the
exact posterior.

Nothing here is used by the fitters; the CLI exposes the samplers behind
the ``dev`` subcommand for side-by-side comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import ndtr

from . import gig
from .exceptions import InputError
from .kernels import KernelConfig, cross_kernel, factor_kernel_matrix, kernel_diag

__all__ = [
    "finite_diff",
    "quad_gig_moment",
    "quad_log_bessel_half",
    "quad_gig_cdf",
    "GibbsResult",
    "sample_summary",
    "gibbs_nonlinear",
    "gibbs_linear",
    "rejection_sample_latent",
    "rejection_sample_weights",
]


# ----------------------------------------------------------------------
# finite differences
# ----------------------------------------------------------------------


def finite_diff(f, x, step: float = 1e-6, richardson: bool = False):
    """Central-difference gradient of a scalar function of a flat vector.

    With ``richardson=True`` the step-h and step-h/2 estimates are
    combined as (4 D(h/2) - D(h)) / 3, cancelling the leading O(h^2)
    error term.
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.shape)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        grad[idx] = _central(f, x, idx, step)
        if richardson:
            half = _central(f, x, idx, step / 2.0)
            grad[idx] = (4.0 * half - grad[idx]) / 3.0
    return grad


def _central(f, x, idx, h):
    xp = x.copy()
    xm = x.copy()
    xp[idx] += h
    xm[idx] -= h
    return (f(xp) - f(xm)) / (2.0 * h)


# ----------------------------------------------------------------------
# quadrature references for GIG(1/2, 1, alpha)
# ----------------------------------------------------------------------


def _log_shifted_integral(c: float, root_alpha: float) -> float:
    """log of I = integral exp(c s - root_alpha cosh s) ds over the line.

    The integrand peaks at s* = asinh(c / root_alpha); the exponent is
    shifted by its maximum before integrating each half-line so the
    quadrature works on an O(1) integrand.
    """
    s_star = float(np.arcsinh(c / root_alpha))
    g_max = c * s_star - root_alpha * np.cosh(s_star)

    def integrand(s):
        # cosh overflow far in the tails means exp(-inf) = 0, the intended limit
        with np.errstate(over="ignore"):
            return np.exp(c * s - root_alpha * np.cosh(s) - g_max)

    left, _ = quad(integrand, -np.inf, s_star, epsabs=1e-13, epsrel=1e-13,
                   limit=400)
    right, _ = quad(integrand, s_star, np.inf, epsabs=1e-13, epsrel=1e-13,
                    limit=400)
    return g_max + float(np.log(left + right))


def quad_gig_moment(p: float, alpha: float) -> float:
    """E[lambda^p] under GIG(1/2, 1, alpha) by numerical quadrature.

    Substituting lambda = sqrt(alpha) exp(s) turns the moment integrals
    into shifted cosh integrals, giving
    E[lambda^p] = alpha^{p/2} I(p + 1/2) / I(1/2) with
    I(c) = integral exp(c s - sqrt(alpha) cosh s) ds.
    """
    if alpha <= 0.0:
        raise InputError("alpha must be positive")
    ra = float(np.sqrt(alpha))
    log_num = _log_shifted_integral(p + 0.5, ra)
    log_den = _log_shifted_integral(0.5, ra)
    return float(alpha ** (p / 2.0) * np.exp(log_num - log_den))


def quad_log_bessel_half(x: float) -> float:
    """log K_{1/2}(x) via the cosh integral representation
    K_nu(x) = 1/2 integral exp(nu s - x cosh s) ds."""
    if x <= 0.0:
        raise InputError("x must be positive")
    return _log_shifted_integral(0.5, float(x)) - float(np.log(2.0))


def quad_gig_cdf(x: float, alpha: float) -> float:
    """CDF of GIG(1/2, 1, alpha) at x by direct quadrature.

    The exponent is shifted by its maximum -sqrt(alpha) (attained at
    lambda = sqrt(alpha)) to keep the integrand well scaled.
    """
    if alpha <= 0.0:
        raise InputError("alpha must be positive")
    if x <= 0.0:
        return 0.0
    ra = float(np.sqrt(alpha))

    def density_unnorm(lam):
        return np.exp(-0.5 * np.log(lam) - 0.5 * (lam + alpha / lam) + ra)

    num, _ = quad(density_unnorm, 0.0, x, epsabs=1e-13, epsrel=1e-13,
                  limit=400, points=[min(x, ra)])
    den_lo, _ = quad(density_unnorm, 0.0, ra, epsabs=1e-13, epsrel=1e-13,
                     limit=400)
    den_hi, _ = quad(density_unnorm, ra, np.inf, epsabs=1e-13, epsrel=1e-13,
                     limit=400)
    return float(num / (den_lo + den_hi))


# ----------------------------------------------------------------------
# Gibbs samplers for the exact augmented posterior
# ----------------------------------------------------------------------


@dataclass
class GibbsResult:
    """Posterior summaries from a Gibbs run.

    ``samples`` holds the thinned latent draws (f at the training inputs,
    or beta for the linear sampler), one row per kept sample.  ``prob``
    holds Monte Carlo class probabilities at the test inputs when those
    were supplied, otherwise None.
    """

    samples: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    prob: np.ndarray | None
    n_kept: int


def sample_summary(result: GibbsResult) -> dict:
    """JSON-ready summary of a sampler run."""
    doc = {
        "n_kept": result.n_kept,
        "mean": [float(v) for v in result.mean],
        "var": [float(v) for v in result.var],
    }
    if result.prob is not None:
        doc["prob"] = [float(v) for v in result.prob]
    return doc


def _check_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim != 2 or len(y) != x.shape[0]:
        raise InputError("x must be 2-D with one label per row")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("labels must be -1 or +1")
    return x, y


def gibbs_nonlinear(x, y, config: KernelConfig, *, n_iters: int = 50_000,
                    burn_in: int = 5_000, thin: int = 10, seed: int = 0,
                    x_star=None, link: str = "sqrt") -> GibbsResult:
    """Two-block Gibbs sampler for the kernel model.

    Alternates lambda_i | f ~ GIG(1/2, 1, (1 - y_i f_i)^2) and
    f | lambda ~ N(C Y (1 + 1/lambda), C) with C^{-1} = K^{-1} + Lambda^{-1}.
    Class probabilities at ``x_star`` marginalize f analytically for each
    kept lambda draw: the latent there is Gaussian with

        mean  k_*' (K + Lambda)^{-1} Y (1 + lambda)
        var   k_** - k_*' (K + Lambda)^{-1} k_*

    and is squashed through the same probit link the variational
    predictive uses, then averaged over draws.
    """
    x, y = _check_xy(x, y)
    n = len(y)
    if burn_in >= n_iters:
        raise InputError("burn_in must be smaller than n_iters")
    rng = np.random.default_rng(seed)

    k_raw, chol_k, jit = factor_kernel_matrix(x, config)
    k_jittered = k_raw + jit * np.eye(n)
    k_inv = cho_solve((chol_k, True), np.eye(n))
    k_inv = 0.5 * (k_inv + k_inv.T)

    if x_star is not None:
        x_star = np.asarray(x_star, dtype=float)
        ks = cross_kernel(x_star, x, config)           # (t, n)
        kss = kernel_diag(x_star, config)
        prob_accum = np.zeros(x_star.shape[0])

    f = np.zeros(n)
    kept = []
    n_kept = 0
    for it in range(n_iters):
        alpha_g = gig.clamp_alpha((1.0 - y * f) ** 2)
        lam = gig.sample(alpha_g, rng)
        prec = k_inv + np.diag(1.0 / lam)
        lp = cholesky(prec, lower=True)
        mean = cho_solve((lp, True), y * (1.0 + 1.0 / lam))
        noise = solve_triangular(lp, rng.standard_normal(n), lower=True,
                                 trans="T")
        f = mean + noise

        if it >= burn_in and (it - burn_in) % thin == 0:
            kept.append(f.copy())
            n_kept += 1
            if x_star is not None:
                m_big = k_jittered + np.diag(lam)
                lm = cholesky(m_big, lower=True)
                w = cho_solve((lm, True), y * (1.0 + lam))
                mean_star = ks @ w
                half = solve_triangular(lm, ks.T, lower=True)
                var_star = np.maximum(kss - np.sum(half * half, axis=0), 0.0)
                if link == "sqrt":
                    prob_accum += ndtr(mean_star / np.sqrt(1.0 + var_star))
                else:
                    prob_accum += ndtr(mean_star / (1.0 + var_star))

    samples = np.asarray(kept)
    prob = prob_accum / n_kept if x_star is not None else None
    return GibbsResult(samples=samples, mean=samples.mean(axis=0),
                       var=samples.var(axis=0), prob=prob, n_kept=n_kept)


def gibbs_linear(x, y, sigma=None, *, n_iters: int = 50_000,
                 burn_in: int = 5_000, thin: int = 10, seed: int = 0,
                 x_star=None) -> GibbsResult:
    """Two-block Gibbs sampler for the linear model.

    Alternates lambda_i | beta ~ GIG(1/2, 1, (1 - y_i x_i' beta)^2) and
    beta | lambda ~ N(B r, B) with B^{-1} = X' Lambda^{-1} X + Sigma^{-1}
    and r = sum_i y_i x_i (1 + 1/lambda_i).  Class probabilities at
    ``x_star`` average Phi(x*' beta) over kept draws (the latent score is
    deterministic given beta).
    """
    x, y = _check_xy(x, y)
    n, d = x.shape
    if burn_in >= n_iters:
        raise InputError("burn_in must be smaller than n_iters")
    if sigma is None:
        sigma = np.eye(d)
    sigma = np.asarray(sigma, dtype=float)
    sig_chol = cholesky(sigma, lower=True)
    sig_inv = cho_solve((sig_chol, True), np.eye(d))
    sig_inv = 0.5 * (sig_inv + sig_inv.T)
    rng = np.random.default_rng(seed)

    if x_star is not None:
        x_star = np.asarray(x_star, dtype=float)
        prob_accum = np.zeros(x_star.shape[0])

    beta = np.zeros(d)
    kept = []
    n_kept = 0
    for it in range(n_iters):
        margins = 1.0 - y * (x @ beta)
        lam = gig.sample(gig.clamp_alpha(margins**2), rng)
        prec = sig_inv + x.T @ (x / lam[:, None])
        lp = cholesky(prec, lower=True)
        r = x.T @ (y * (1.0 + 1.0 / lam))
        mean = cho_solve((lp, True), r)
        noise = solve_triangular(lp, rng.standard_normal(d), lower=True,
                                 trans="T")
        beta = mean + noise
        if it >= burn_in and (it - burn_in) % thin == 0:
            kept.append(beta.copy())
            n_kept += 1
            if x_star is not None:
                prob_accum += ndtr(x_star @ beta)

    samples = np.asarray(kept)
    prob = prob_accum / n_kept if x_star is not None else None
    return GibbsResult(samples=samples, mean=samples.mean(axis=0),
                       var=samples.var(axis=0), prob=prob, n_kept=n_kept)


# ----------------------------------------------------------------------
# exact posterior draws by rejection from the prior
# ----------------------------------------------------------------------


def rejection_sample_latent(x, y, config: KernelConfig, n_samples: int,
                            seed: int = 0, max_proposals: int = 50_000_000):
    """Independent exact draws of f | y by rejection.

    The hinge pseudolikelihood exp(-2 sum_i max(0, 1 - y_i f_i)) is at
    most 1, so proposing f from the GP prior and accepting with that
    probability yields exact independent posterior samples.  Returns
    (samples, n_proposals).
    """
    x, y = _check_xy(x, y)
    n = len(y)
    _, chol_k, _ = factor_kernel_matrix(x, config)
    rng = np.random.default_rng(seed)
    out = np.empty((n_samples, n))
    got = 0
    used = 0
    block = 4096
    while got < n_samples:
        if used >= max_proposals:
            raise InputError(
                f"rejection sampler exceeded {max_proposals} proposals "
                f"({got}/{n_samples} accepted); acceptance rate too low"
            )
        f = rng.standard_normal((block, n)) @ chol_k.T
        used += block
        log_acc = -2.0 * np.sum(np.maximum(0.0, 1.0 - y * f), axis=1)
        keep = np.log(rng.random(block)) < log_acc
        take = f[keep][: n_samples - got]
        out[got:got + len(take)] = take
        got += len(take)
    return out, used


def rejection_sample_weights(x, y, sigma, n_samples: int, seed: int = 0,
                             max_proposals: int = 50_000_000):
    """Independent exact draws of beta | y by rejection from N(0, Sigma)."""
    x, y = _check_xy(x, y)
    d = x.shape[1]
    sigma = np.eye(d) if sigma is None else np.asarray(sigma, dtype=float)
    chol_s = cholesky(sigma, lower=True)
    rng = np.random.default_rng(seed)
    out = np.empty((n_samples, d))
    got = 0
    used = 0
    block = 4096
    while got < n_samples:
        if used >= max_proposals:
            raise InputError(
                f"rejection sampler exceeded {max_proposals} proposals "
                f"({got}/{n_samples} accepted); acceptance rate too low"
            )
        beta = rng.standard_normal((block, d)) @ chol_s.T
        used += block
        margins = 1.0 - y[None, :] * (beta @ x.T)
        log_acc = -2.0 * np.sum(np.maximum(0.0, margins), axis=1)
        keep = np.log(rng.random(block)) < log_acc
        take = beta[keep][: n_samples - got]
        out[got:got + len(take)] = take
        got += len(take)
    return out, used

"""Predictive distributions, probit squashing, and evaluation metrics.

The latent score at a test point x* is Gaussian under the variational
posterior:

    mean  mu* = K_*m K_mm^{-1} mu
    var   s*^2 = k(x*, x*) - K_*m K_mm^{-1} K_m* + K_*m K_mm^{-1} zeta K_mm^{-1} K_m*

(the exact marginalization of q(u) through the conditional prior).  Class
probabilities squash the latent Gaussian through a probit link:

    link="sqrt"   P(y=+1) = Phi(mu* / sqrt(1 + s*^2))   (default)
    link="plain"  P(y=+1) = Phi(mu* / (1 + s*^2))

The "sqrt" form is the exact Gaussian average of Phi(f*); the "plain"
form divides by the variance itself rather than its square root and is
kept available behind the flag for comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import ndtr

from .exceptions import InputError, NumericalWarning
from .kernels import KernelConfig, cross_kernel, factor_kernel_matrix, kernel_diag

__all__ = [
    "PredictiveDistribution",
    "squash",
    "predict",
    "error_rate",
    "brier_score",
    "auc_score",
    "EvalReport",
]

LINKS = ("sqrt", "plain")


def squash(mean, var, link: str = "sqrt") -> np.ndarray:
    """Map latent Gaussian moments to P(y = +1) through the probit link."""
    if link not in LINKS:
        raise InputError(f"unknown link {link!r}; expected one of {LINKS}")
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var < 0.0):
        raise InputError("variances must be non-negative")
    denom = np.sqrt(1.0 + var) if link == "sqrt" else 1.0 + var
    return ndtr(mean / denom)


@dataclass
class PredictiveDistribution:
    """Latent Gaussian moments and class probabilities at test points."""

    mean: np.ndarray
    var: np.ndarray
    prob: np.ndarray

    def decisions(self) -> np.ndarray:
        """Hard labels in {-1, +1} (ties at probability 0.5 go to +1)."""
        return np.where(self.prob >= 0.5, 1.0, -1.0)


def predict(state, z, config: KernelConfig, x_star,
            link: str = "sqrt") -> PredictiveDistribution:
    """Predictive distribution of the sparse model at new inputs.

    Parameters
    ----------
    state : VariationalState
        Fitted variational parameters (mu, zeta) over the inducing values.
    z : (m, d) array
        Inducing inputs the state was fitted with.
    config : KernelConfig
        Kernel the state was fitted with.
    x_star : (t, d) array
        Test inputs.
    """
    z = np.asarray(z, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim != 2:
        raise InputError("x_star must be 2-D")
    if x_star.shape[1] != z.shape[1]:
        raise InputError(
            f"x_star has {x_star.shape[1]} features but z has {z.shape[1]}"
        )
    if len(state.mu) != z.shape[0]:
        raise InputError("state dimension does not match inducing points")

    _, chol, _ = factor_kernel_matrix(z, config)
    ks = cross_kernel(x_star, z, config)               # (t, m)
    w = cho_solve((chol, True), ks.T)                  # (m, t)
    mean = ks @ cho_solve((chol, True), state.mu)
    kss = kernel_diag(x_star, config)
    var = (kss - np.einsum("tm,mt->t", ks, w)
           + np.einsum("mt,mt->t", w, state.zeta @ w))
    floor = -1e-8 * max(1.0, float(np.max(kss)))
    if np.any(var < floor):
        warnings.warn("predictive variances went noticeably negative; "
                      "clamping to zero", NumericalWarning)
    var = np.maximum(var, 0.0)
    return PredictiveDistribution(mean=mean, var=var,
                                  prob=squash(mean, var, link))


# ----------------------------------------------------------------------
# metrics
# ----------------------------------------------------------------------


def _canon_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    vals = np.unique(y)
    if np.all(np.isin(vals, (0.0, 1.0))):
        return 2.0 * y - 1.0
    if np.all(np.isin(vals, (-1.0, 1.0))):
        return y
    raise InputError("labels must be in {-1, +1} or {0, 1}")


def error_rate(values, y) -> float:
    """Fraction misclassified.

    ``values`` may be class probabilities in [0, 1] (thresholded at 0.5)
    or real-valued scores / hard labels (thresholded at 0).
    """
    values = np.asarray(values, dtype=float).ravel()
    y = _canon_labels(y)
    if len(values) != len(y):
        raise InputError("values and labels differ in length")
    if np.all((values >= 0.0) & (values <= 1.0)):
        pred = np.where(values >= 0.5, 1.0, -1.0)
    else:
        pred = np.where(values >= 0.0, 1.0, -1.0)
    return float(np.mean(pred != y))


def brier_score(prob, y) -> float:
    """Mean squared distance between probabilities and 0/1 outcomes."""
    prob = np.asarray(prob, dtype=float).ravel()
    y = _canon_labels(y)
    if len(prob) != len(y):
        raise InputError("prob and labels differ in length")
    if np.any((prob < 0.0) | (prob > 1.0)):
        raise InputError("probabilities must lie in [0, 1]")
    y01 = (y + 1.0) / 2.0
    return float(np.mean((y01 - prob) ** 2))


def auc_score(scores, y) -> float:
    """Area under the ROC curve via the rank statistic, ties counted half."""
    scores = np.asarray(scores, dtype=float).ravel()
    y = _canon_labels(y)
    if len(scores) != len(y):
        raise InputError("scores and labels differ in length")
    pos = y > 0
    n_pos = int(np.sum(pos))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("AUC needs both classes present")
    from scipy.stats import rankdata

    ranks = rankdata(scores)
    u = float(np.sum(ranks[pos])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class EvalReport:
    """Per-fold metrics and timing from a cross-validation run."""

    error_rates: list = field(default_factory=list)
    briers: list = field(default_factory=list)
    aucs: list = field(default_factory=list)
    fit_seconds: list = field(default_factory=list)
    n_folds: int = 0
    total_seconds: float = 0.0

    @staticmethod
    def _mean_std(xs):
        if not xs:
            return float("nan"), float("nan")
        a = np.asarray(xs, dtype=float)
        return float(a.mean()), float(a.std())

    @property
    def error_mean(self):
        return self._mean_std(self.error_rates)[0]

    @property
    def error_std(self):
        return self._mean_std(self.error_rates)[1]

    @property
    def brier_mean(self):
        return self._mean_std(self.briers)[0]

    @property
    def brier_std(self):
        return self._mean_std(self.briers)[1]

    @property
    def auc_mean(self):
        return self._mean_std(self.aucs)[0]

    @property
    def fit_seconds_total(self):
        return float(np.sum(self.fit_seconds)) if self.fit_seconds else 0.0

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "error_rate": {"mean": self.error_mean, "std": self.error_std,
                           "folds": list(map(float, self.error_rates))},
            "brier": {"mean": self.brier_mean, "std": self.brier_std,
                      "folds": list(map(float, self.briers))},
            "auc": {"mean": self.auc_mean,
                    "folds": list(map(float, self.aucs))},
            "fit_seconds": list(map(float, self.fit_seconds)),
            "total_seconds": self.total_seconds,
        }

    def __str__(self) -> str:
        return (
            f"{self.n_folds}-fold CV: "
            f"error {self.error_mean:.3f} +/- {self.error_std:.3f}, "
            f"Brier {self.brier_mean:.3f} +/- {self.brier_std:.3f}, "
            f"AUC {self.auc_mean:.3f}, "
            f"fit time {self.fit_seconds_total:.2f}s"
        )

"""Type-II maximum likelihood tuning of kernel hyperparameters.

The ELBO depends on a kernel hyperparameter omega through the Gram
blocks.  Writing J_mm, J_nm, J_nn for the blockwise derivatives,
iota = (J_nm - kappa J_mm) K_mm^{-1} for the derivative of kappa, and
M = mu mu' + zeta, the analytic gradient is

    dL/domega = -1/2 [ tr(K_mm^{-1} J_mm (I - K_mm^{-1} zeta))
                       - mu' K_mm^{-1} J_mm K_mm^{-1} mu
                       - 2 (1 + alpha^{-1/2})' Y iota mu
                       + sum_i alpha_i^{-1/2} d_i ],

    d = diag( kappa M iota' + iota M kappa'
              - kappa J_mn - iota K_mn + J_nn ),

where every diagonal is accumulated row-wise so no n x n matrix is ever
formed.  ``tune_step`` ascends all hyperparameters jointly in log space
(which keeps them positive), halving the step up to ``max_halvings``
times if the ELBO at the proposed kernel is not finite, and skipping the
update entirely if no finite step is found.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .kernels import kernel_grad
from .nonlinear import (SparseGPWorkspace, VariationalState, _check_labels,
                        build_workspace, elbo)

__all__ = ["hyper_gradient", "hyper_gradients", "tune_step", "TuneResult"]


def hyper_gradient(state: VariationalState, ws: SparseGPWorkspace, y,
                   which: str) -> float:
    """d ELBO / d omega for one kernel hyperparameter, at fixed state."""
    y = _check_labels(y, ws.n)
    grads = kernel_grad(ws.x, ws.z, ws.config, which)
    j_mm, j_nm, j_nn = grads.j_mm, grads.j_nm, grads.j_nn_diag
    kap = ws.kappa
    k_inv = ws.k_mm_inv
    mu, zeta, alpha = state.mu, state.zeta, state.alpha
    s = alpha ** -0.5

    iota = (j_nm - kap @ j_mm) @ k_inv                     # (n, m)

    a1 = k_inv @ j_mm                                      # (m, m)
    term1 = float(np.trace(a1)) - float(np.sum(a1 * (k_inv @ zeta).T))

    w = k_inv @ mu
    quad = float(w @ (j_mm @ w))
    lin = 2.0 * float(np.sum((1.0 + s) * y * (iota @ mu)))

    big_m = np.outer(mu, mu) + zeta
    d = (2.0 * np.einsum("ij,ij->i", kap @ big_m, iota)
         - np.einsum("ij,ij->i", kap, j_nm)
         - np.einsum("ij,ij->i", iota, ws.gram.k_nm)
         + j_nn)
    term3 = float(np.sum(s * d))

    return -0.5 * (term1 - quad - lin + term3)


def hyper_gradients(state: VariationalState, ws: SparseGPWorkspace,
                    y) -> dict[str, float]:
    """Gradients for every tunable hyperparameter of the workspace kernel."""
    return {p: hyper_gradient(state, ws, y, p)
            for p in ws.config.hyperparameter_ids()}


@dataclass
class TuneResult:
    """Outcome of one hyperparameter ascent step."""

    workspace: SparseGPWorkspace
    accepted: bool
    step_used: float
    elbo: float
    gradients: dict


def tune_step(state: VariationalState, ws: SparseGPWorkspace, y, *,
              step_size: float = 0.1, max_halvings: int = 10,
              max_log_step: float = 0.25) -> TuneResult:
    """One joint log-space gradient ascent step on the kernel.

    For each tunable parameter h the update is
    log h <- log h + step * h * dL/dh, i.e. multiplicative in h, so
    positivity is automatic.  The log-space movement per call is clamped
    to ``max_log_step`` so a large gradient (or a parameter far from its
    optimum) cannot jump several orders of magnitude between variational
    updates.  Parameters currently at zero (possible for sum weights)
    are left untouched.  If rebuilding the Gram matrices or evaluating
    the ELBO fails or returns a non-finite value, the step is halved;
    after ``max_halvings`` failures the step is skipped and the previous
    workspace returned unchanged.
    """
    y = _check_labels(y, ws.n)
    grads = hyper_gradients(state, ws, y)
    step = float(step_size)
    for _ in range(max_halvings + 1):
        config = ws.config
        for name, g in grads.items():
            val = config.get(name)
            if val <= 0.0:
                continue
            move = np.clip(step * val * g, -max_log_step, max_log_step)
            config = config.with_value(name, val * np.exp(move))
        try:
            new_ws = build_workspace(ws.x, ws.z, config)
            value = elbo(state, new_ws, y)
        except NumericalError:
            value = np.nan
        if np.isfinite(value):
            return TuneResult(workspace=new_ws, accepted=True,
                              step_used=step, elbo=float(value),
                              gradients=grads)
        step *= 0.5
    return TuneResult(workspace=ws, accepted=False, step_used=0.0,
                      elbo=np.nan, gradients=grads)

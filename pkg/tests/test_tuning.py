"""Kernel hyperparameter gradients and the log-space ascent step."""

import numpy as np
import pytest

from bsvm.kernels import KernelComponent, KernelConfig
from bsvm.nonlinear import (TrainConfig, VariationalState, build_workspace,
                            elbo, fit_batch, fit_svi)
from bsvm.tuning import TuneResult, hyper_gradient, hyper_gradients, tune_step


def _problem(seed, cfg, n=18, d=2, m=5):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    z = x[rng.choice(n, size=m, replace=False)]
    ws = build_workspace(x, z, cfg)
    # a few coordinate sweeps give a generic but well-scaled state
    state = fit_batch(x, y, cfg, z=z, max_sweeps=3, tol=0.0).state
    return ws, state, y


def _fd_hyper(ws, state, y, which, h=1e-5):
    cfg = ws.config
    v0 = cfg.get(which)

    def value(v):
        w = build_workspace(ws.x, ws.z, cfg.with_value(which, v))
        return elbo(state, w, y)

    return (value(v0 + h) - value(v0 - h)) / (2.0 * h)


@pytest.mark.parametrize("cfg,params", [
    (KernelConfig.rbf(theta=1.3), ("theta0",)),
    (KernelConfig.sqexp(theta=0.9), ("theta0",)),
    (KernelConfig.weighted_sum(
        (KernelComponent("rbf", theta=1.1, gamma=0.6),
         KernelComponent("sqexp", theta=2.0, gamma=0.8))),
     ("theta0", "theta1", "gamma0", "gamma1")),
    (KernelConfig.weighted_sum(
        (KernelComponent("linear", gamma=0.4),
         KernelComponent("sqexp", theta=1.5, gamma=1.0))),
     ("theta1", "gamma0", "gamma1")),
])
def test_hyper_gradient_matches_finite_differences(cfg, params):
    ws, state, y = _problem(0, cfg)
    for which in params:
        analytic = hyper_gradient(state, ws, y, which)
        fd = _fd_hyper(ws, state, y, which)
        np.testing.assert_allclose(analytic, fd, rtol=1e-4, atol=1e-7)


def test_hyper_gradients_covers_all_ids():
    cfg = KernelConfig.weighted_sum(
        (KernelComponent("rbf", theta=1.0),
         KernelComponent("linear", gamma=0.5)))
    ws, state, y = _problem(1, cfg)
    grads = hyper_gradients(state, ws, y)
    assert set(grads) == {"theta0", "gamma0", "gamma1"}


def test_zero_weight_component_has_zero_theta_gradient():
    # the kernel does not depend on the length scale of a gamma=0 component
    cfg = KernelConfig.weighted_sum(
        (KernelComponent("sqexp", theta=1.2, gamma=0.0),
         KernelComponent("sqexp", theta=0.7, gamma=1.0)))
    ws, state, y = _problem(2, cfg)
    np.testing.assert_allclose(hyper_gradient(state, ws, y, "theta0"), 0.0,
                               atol=1e-14)


def test_duplicate_component_at_zero_weight_matches_existing_gradient():
    # gamma gradient of a zero-weight copy equals the live component's
    base = KernelComponent("sqexp", theta=1.4, gamma=1.0)
    cfg = KernelConfig.weighted_sum(
        (base, KernelComponent("sqexp", theta=1.4, gamma=0.0)))
    ws, state, y = _problem(3, cfg)
    g_live = hyper_gradient(state, ws, y, "gamma0")
    g_zero = hyper_gradient(state, ws, y, "gamma1")
    np.testing.assert_allclose(g_zero, g_live, rtol=1e-12)


def test_tune_step_ascends_elbo():
    cfg = KernelConfig.sqexp(theta=0.5)
    ws, state, y = _problem(4, cfg)
    before = elbo(state, ws, y)
    grad = hyper_gradient(state, ws, y, "theta0")
    assert abs(grad) > 1e-8
    result = tune_step(state, ws, y, step_size=1e-3)
    assert isinstance(result, TuneResult)
    assert result.accepted
    assert result.elbo > before


def test_tune_step_preserves_positivity_and_clamps_movement():
    cfg = KernelConfig.sqexp(theta=0.5)
    ws, state, y = _problem(5, cfg)
    # an absurd step size cannot move log(theta) by more than the clamp
    result = tune_step(state, ws, y, step_size=1e9, max_log_step=0.25)
    theta_new = result.workspace.config.get("theta0")
    ratio = theta_new / 0.5
    assert np.exp(-0.25) - 1e-12 <= ratio <= np.exp(0.25) + 1e-12
    assert abs(abs(np.log(ratio)) - 0.25) < 1e-12
    assert theta_new > 0.0


def test_tune_step_leaves_zero_weights_untouched():
    cfg = KernelConfig.weighted_sum(
        (KernelComponent("sqexp", theta=1.2, gamma=0.0),
         KernelComponent("sqexp", theta=0.7, gamma=1.0)))
    ws, state, y = _problem(6, cfg)
    result = tune_step(state, ws, y, step_size=0.1)
    assert result.accepted
    new_cfg = result.workspace.config
    assert new_cfg.get("gamma0") == 0.0
    assert new_cfg.get("theta0") == 1.2  # zero gradient, exp(0) move
    assert new_cfg.get("theta1") != 0.7


def test_tune_step_skips_when_elbo_cannot_be_evaluated():
    cfg = KernelConfig.sqexp(theta=1.0)
    ws, state, y = _problem(7, cfg)
    broken = VariationalState(state.mu, -np.eye(ws.m), state.alpha)
    result = tune_step(broken, ws, y, step_size=0.1, max_halvings=3)
    assert not result.accepted
    assert result.step_used == 0.0
    assert result.workspace is ws


def test_auto_tune_records_trajectory():
    rng = np.random.default_rng(8)
    n = 40
    x = rng.standard_normal((n, 2))
    y = np.sign(x[:, 0] * x[:, 1] + 0.2 * rng.standard_normal(n))
    y[y == 0] = 1.0
    z = x[:8]
    train = TrainConfig(batch_size=10, max_epochs=20, tol=0.0,
                        track_elbo=False, auto_tune=True, tune_interval=10,
                        tune_step_size=0.05, seed=0)
    result = fit_svi(x, y, KernelConfig.sqexp(theta=0.6), train, z)
    assert len(result.hyper_trace) >= 1
    t, values, value = result.hyper_trace[0]
    assert t % 10 == 0
    assert set(values) == {"theta0"}
    assert np.isfinite(value)
    # the fitted kernel is the tuned one
    assert result.config.get("theta0") != 0.6
    assert result.workspace.config.get("theta0") == result.config.get("theta0")


def test_tune_interval_beyond_run_means_no_tuning():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((12, 2))
    y = np.where(rng.random(12) < 0.5, -1.0, 1.0)
    z = x[:4]
    cfg = KernelConfig.sqexp(theta=1.0)
    base = TrainConfig(batch_size=4, max_epochs=3, tol=0.0,
                       track_elbo=False, seed=0)
    tuned = TrainConfig(batch_size=4, max_epochs=3, tol=0.0,
                        track_elbo=False, seed=0, auto_tune=True,
                        tune_interval=1000)
    r_base = fit_svi(x, y, cfg, base, z)
    r_tuned = fit_svi(x, y, cfg, tuned, z)
    assert r_tuned.hyper_trace == []
    np.testing.assert_array_equal(r_base.state.mu, r_tuned.state.mu)
    np.testing.assert_array_equal(r_base.state.zeta, r_tuned.state.zeta)

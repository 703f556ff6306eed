"""Finite differences, quadrature references, and the exact samplers.

The Gibbs samplers and the rejection samplers are two independent routes
to the same posterior; their agreement on small problems is the main
correctness evidence for both.
"""

import numpy as np
import pytest
from scipy.special import kv

from bsvm import gig
from bsvm.exceptions import InputError
from bsvm.kernels import KernelConfig
from bsvm.oracles import (finite_diff, gibbs_linear, gibbs_nonlinear,
                          quad_gig_cdf, quad_gig_moment,
                          quad_log_bessel_half, rejection_sample_latent,
                          rejection_sample_weights, sample_summary)


# ----------------------------------------------------------------------
# finite differences
# ----------------------------------------------------------------------


def test_finite_diff_exact_on_quadratics():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    b = rng.standard_normal(4)
    x0 = rng.standard_normal(4)

    def f(x):
        return 0.5 * x @ a @ x + b @ x

    np.testing.assert_allclose(finite_diff(f, x0, step=1e-5),
                               0.5 * (a + a.T) @ x0 + b, rtol=1e-8)


def _scalar_exp(v):
    return float(np.exp(v[0]))


def test_finite_diff_error_scales_quadratically():
    # central differences of exp have error  e^x h^2 / 6
    x0 = np.array([1.0])
    err_h = abs(finite_diff(_scalar_exp, x0, step=1e-3)[0] - np.e)
    err_half = abs(finite_diff(_scalar_exp, x0, step=5e-4)[0] - np.e)
    np.testing.assert_allclose(err_h / err_half, 4.0, rtol=0.05)


def test_finite_diff_richardson_improves():
    x0 = np.array([1.0])
    plain = abs(finite_diff(_scalar_exp, x0, step=1e-3)[0] - np.e)
    rich = abs(finite_diff(_scalar_exp, x0, step=1e-3,
                           richardson=True)[0] - np.e)
    assert rich < plain / 100.0


def test_finite_diff_preserves_matrix_shape():
    m0 = np.arange(6.0).reshape(2, 3)
    grad = finite_diff(lambda m: np.sum(m**2), m0, step=1e-6)
    assert grad.shape == (2, 3)
    np.testing.assert_allclose(grad, 2.0 * m0, rtol=1e-7, atol=1e-8)


# ----------------------------------------------------------------------
# quadrature references
# ----------------------------------------------------------------------


def test_quad_log_bessel_half_matches_scipy():
    for x in np.logspace(-3, 2, 11):
        np.testing.assert_allclose(quad_log_bessel_half(x),
                                   np.log(kv(0.5, x)), rtol=1e-11)


def test_quad_gig_moment_closed_forms():
    for alpha in (0.25, 1.0, 7.0):
        np.testing.assert_allclose(quad_gig_moment(-1.0, alpha),
                                   alpha ** -0.5, rtol=1e-9)
        np.testing.assert_allclose(quad_gig_moment(1.0, alpha),
                                   np.sqrt(alpha) + 1.0, rtol=1e-9)


def test_quad_gig_cdf_shape():
    assert quad_gig_cdf(0.0, 2.0) == 0.0
    assert quad_gig_cdf(-1.0, 2.0) == 0.0
    grid = [0.5, 1.0, 2.0, 4.0, 8.0]
    cdf = [quad_gig_cdf(t, 2.0) for t in grid]
    assert all(np.diff(cdf) > 0.0)
    assert 0.0 < cdf[0] < cdf[-1] < 1.0
    np.testing.assert_allclose(quad_gig_cdf(400.0, 2.0), 1.0, rtol=1e-9)


def test_quad_domain_errors():
    with pytest.raises(InputError):
        quad_gig_moment(1.0, 0.0)
    with pytest.raises(InputError):
        quad_log_bessel_half(-1.0)
    with pytest.raises(InputError):
        quad_gig_cdf(1.0, -2.0)


# ----------------------------------------------------------------------
# samplers: two independent routes to the same posterior
# ----------------------------------------------------------------------


def test_gibbs_nonlinear_matches_rejection_sampler():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 1))
    y = np.array([1.0, -1.0, 1.0, -1.0])
    cfg = KernelConfig.sqexp(theta=1.0)
    g = gibbs_nonlinear(x, y, cfg, n_iters=40_000, burn_in=4_000, thin=5,
                        seed=1)
    r, _ = rejection_sample_latent(x, y, cfg, n_samples=4000, seed=2)
    np.testing.assert_allclose(g.mean, r.mean(axis=0), atol=0.06)
    np.testing.assert_allclose(g.var, r.var(axis=0), atol=0.06)


def test_gibbs_linear_matches_rejection_sampler():
    rng = np.random.default_rng(0)
    _ = rng.standard_normal((4, 1))  # keep the draw stream aligned
    x = rng.standard_normal((6, 2))
    y = np.sign(x[:, 0] + 0.2 * rng.standard_normal(6))
    y[y == 0] = 1.0
    g = gibbs_linear(x, y, None, n_iters=40_000, burn_in=4_000, thin=5,
                     seed=3)
    r, _ = rejection_sample_weights(x, y, None, n_samples=4000, seed=4)
    np.testing.assert_allclose(g.mean, r.mean(axis=0), atol=0.06)
    np.testing.assert_allclose(g.var, r.var(axis=0), atol=0.06)


def test_linear_kernel_gibbs_agrees_with_weight_space_gibbs():
    # K = X X' makes f = X beta with beta ~ N(0, I): the two samplers
    # target the same latent posterior up to jitter
    rng = np.random.default_rng(5)
    x = rng.standard_normal((5, 2))
    y = np.sign(x[:, 0] - 0.3 * x[:, 1])
    y[y == 0] = 1.0
    gf = gibbs_nonlinear(x, y, KernelConfig.linear(), n_iters=40_000,
                         burn_in=4_000, thin=5, seed=6)
    gb = gibbs_linear(x, y, None, n_iters=40_000, burn_in=4_000, thin=5,
                      seed=7)
    np.testing.assert_allclose(gf.mean, x @ gb.mean, atol=0.1)


def test_gibbs_single_point_mean_has_label_sign():
    g = gibbs_nonlinear(np.array([[0.4]]), np.array([1.0]),
                        KernelConfig.sqexp(theta=1.0), n_iters=10_000,
                        burn_in=1_000, thin=5, seed=8)
    assert g.mean[0] > 0.5  # pulled past zero toward the margin


def test_gibbs_seed_reproducibility():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 2))
    y = np.array([1.0, 1.0, -1.0, -1.0])
    kwargs = dict(n_iters=500, burn_in=100, thin=2, seed=42)
    a = gibbs_nonlinear(x, y, KernelConfig.sqexp(theta=1.0), **kwargs)
    b = gibbs_nonlinear(x, y, KernelConfig.sqexp(theta=1.0), **kwargs)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.n_kept == b.n_kept == 200


def test_gibbs_probabilities_at_test_points():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((5, 2))
    y = np.sign(x[:, 0] - 0.3 * x[:, 1])
    y[y == 0] = 1.0
    g = gibbs_nonlinear(x, y, KernelConfig.sqexp(theta=1.0), n_iters=4_000,
                        burn_in=500, thin=5, seed=10, x_star=x[:2])
    assert g.prob.shape == (2,)
    assert np.all((g.prob > 0.0) & (g.prob < 1.0))
    doc = sample_summary(g)
    assert set(doc) == {"n_kept", "mean", "var", "prob"}
    no_star = gibbs_linear(x, y, None, n_iters=500, burn_in=100, seed=0)
    assert "prob" not in sample_summary(no_star)


def test_gibbs_validation():
    x = np.zeros((3, 1))
    with pytest.raises(InputError):
        gibbs_nonlinear(x, np.array([1.0, 2.0, -1.0]),
                        KernelConfig.sqexp(theta=1.0), n_iters=10)
    with pytest.raises(InputError):
        gibbs_linear(x, np.ones(3), None, n_iters=10, burn_in=10)


def test_rejection_sampler_proposal_budget():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((12, 2))
    y = np.where(rng.random(12) < 0.5, 1.0, -1.0)
    with pytest.raises(InputError, match="acceptance rate"):
        rejection_sample_latent(x, y, KernelConfig.sqexp(theta=1.0),
                                n_samples=50, seed=0, max_proposals=4096)


def test_gig_sampler_standard_error_halves_with_4x_draws():
    # independent draws: SE of the mean scales as 1/sqrt(n)
    rng = np.random.default_rng(9)
    small = np.array([gig.sample(np.full(250, 2.0), rng).mean()
                      for _ in range(200)])
    big = np.array([gig.sample(np.full(1000, 2.0), rng).mean()
                    for _ in range(200)])
    ratio = small.std() / big.std()
    assert 1.6 < ratio < 2.5

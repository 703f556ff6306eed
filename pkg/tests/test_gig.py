"""Closed-form moments, Bessel evaluation, and sampling for GIG(1/2, 1, alpha).

Every closed form is checked against an independent quadrature route
(``bsvm.oracles``) plus frozen reference values, so a regression in either
route is caught.
"""

import numpy as np
import pytest
from scipy import stats
from scipy.special import kv

from bsvm import gig
from bsvm.exceptions import InputError
from bsvm.oracles import quad_gig_cdf, quad_gig_moment, quad_log_bessel_half


def test_e_inv_lambda_closed_form():
    np.testing.assert_allclose(gig.e_inv_lambda(4.0), 0.5, rtol=0)
    np.testing.assert_allclose(gig.e_inv_lambda(1.0), 1.0, rtol=0)
    alpha = np.logspace(-6, 6, 13)
    np.testing.assert_array_equal(gig.e_inv_lambda(alpha), alpha ** -0.5)


def test_e_lambda_closed_form():
    np.testing.assert_allclose(gig.e_lambda(4.0), 3.0, rtol=1e-15)
    np.testing.assert_allclose(gig.e_lambda(1.0), 2.0, rtol=1e-15)
    np.testing.assert_allclose(gig.e_lambda(1e4), np.sqrt(1e4) + 1.0,
                               rtol=1e-15)


def test_moments_match_quadrature():
    for alpha in np.logspace(-6, 6, 13):
        np.testing.assert_allclose(gig.e_lambda(alpha),
                                   quad_gig_moment(1, alpha), rtol=1e-8)
        np.testing.assert_allclose(gig.e_inv_lambda(alpha),
                                   quad_gig_moment(-1, alpha), rtol=1e-8)


def test_moments_frozen_quadrature_values():
    # reference values computed once with the quadrature oracle
    np.testing.assert_allclose(gig.e_lambda(2.5), 2.58113883008419,
                               rtol=1e-12)
    np.testing.assert_allclose(gig.e_inv_lambda(2.5), 0.63245553203367588,
                               rtol=1e-12)


def test_log_bessel_half_reference_values():
    # K_{1/2}(1) = 0.461068...
    np.testing.assert_allclose(np.exp(gig.log_bessel_half(1.0)),
                               0.46106850444789454, rtol=1e-12)
    # large argument: plain kv underflows but the log form stays finite
    np.testing.assert_allclose(gig.log_bessel_half(100.0),
                               -100.0 + 0.5 * np.log(np.pi / 200.0),
                               rtol=1e-12)
    assert np.isfinite(gig.log_bessel_half(1e8))
    assert np.isfinite(gig.log_bessel_half(1e-8))


def test_log_bessel_half_matches_quadrature_and_scipy():
    for x in np.logspace(-3, 3, 13):
        np.testing.assert_allclose(gig.log_bessel_half(x),
                                   quad_log_bessel_half(x), rtol=1e-10)
    # independent scipy route where kv does not underflow
    for x in (0.1, 1.0, 5.0, 50.0):
        np.testing.assert_allclose(gig.log_bessel_half(x),
                                   np.log(kv(0.5, x)), rtol=1e-12)


def test_log_bessel_half_monotone_decreasing():
    x = np.logspace(-3, 3, 200)
    vals = gig.log_bessel_half(x)
    assert np.all(np.diff(vals) < 0.0)


def test_sampler_positive_and_deterministic():
    draws1 = gig.sample(2.0, np.random.default_rng(0), size=1000)
    draws2 = gig.sample(2.0, np.random.default_rng(0), size=1000)
    assert np.all(draws1 > 0.0)
    np.testing.assert_array_equal(draws1, draws2)


def test_sampler_mean_matches_closed_form():
    rng = np.random.default_rng(7)
    draws = gig.sample(4.0, rng, size=1_000_000)
    se = draws.std() / np.sqrt(len(draws))
    assert abs(draws.mean() - gig.e_lambda(4.0)) < 4.0 * se


def test_sampler_inverse_mean_matches_closed_form():
    rng = np.random.default_rng(11)
    inv = 1.0 / gig.sample(9.0, rng, size=500_000)
    se = inv.std() / np.sqrt(len(inv))
    assert abs(inv.mean() - gig.e_inv_lambda(9.0)) < 4.0 * se


@pytest.mark.parametrize("alpha", [0.1, 1.0, 10.0])
def test_sampler_ks_against_quadrature_cdf(alpha):
    rng = np.random.default_rng(int(alpha * 10))
    draws = gig.sample(alpha, rng, size=1000)

    def cdf(xs):
        return np.array([quad_gig_cdf(float(x), alpha) for x in np.atleast_1d(xs)])

    result = stats.kstest(draws, cdf)
    assert result.pvalue > 0.01, f"KS p-value {result.pvalue} at alpha={alpha}"


def test_clamp_alpha_floor():
    out = gig.clamp_alpha(np.array([0.0, 1e-20, 0.5]))
    np.testing.assert_array_equal(out, [gig.ALPHA_FLOOR, gig.ALPHA_FLOOR, 0.5])


def test_domain_errors():
    with pytest.raises(InputError):
        gig.e_lambda(-1.0)
    with pytest.raises(InputError):
        gig.e_inv_lambda(0.0)
    with pytest.raises(InputError):
        gig.log_bessel_half(0.0)
    with pytest.raises(InputError):
        gig.sample(np.array([1.0, -2.0]), np.random.default_rng(0))
    with pytest.raises(InputError):
        gig.e_lambda(np.array([]))

"""Predictive distribution, probit squashing, and evaluation metrics."""

import numpy as np
import pytest
from scipy.special import ndtr

from bsvm.exceptions import InputError
from bsvm.kernels import KernelConfig, cross_kernel, factor_kernel_matrix
from bsvm.nonlinear import fit_batch
from bsvm.prediction import (EvalReport, PredictiveDistribution, auc_score,
                             brier_score, error_rate, predict, squash)
from scipy.linalg import cho_solve


def _fitted_toy(seed=0, n=25):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    y = np.sign(x[:, 0] + 0.3 * rng.standard_normal(n))
    y[y == 0] = 1.0
    cfg = KernelConfig.sqexp(theta=1.2)
    result = fit_batch(x, y, cfg, z=None, max_sweeps=100, tol=0.0)
    return x, y, cfg, result


# ----------------------------------------------------------------------
# squash
# ----------------------------------------------------------------------


def test_squash_zero_mean_is_half():
    np.testing.assert_allclose(squash(0.0, 3.7), 0.5, rtol=0)


def test_squash_zero_variance_is_plain_probit():
    means = np.array([-2.0, -0.5, 0.0, 1.5])
    np.testing.assert_allclose(squash(means, np.zeros(4)), ndtr(means),
                               rtol=1e-15)


def test_squash_probability_shrinks_toward_half_with_variance():
    variances = np.linspace(0.0, 50.0, 30)
    probs_pos = squash(np.full(30, 1.3), variances)
    assert np.all(np.diff(probs_pos) < 0.0)
    assert probs_pos.min() > 0.5
    probs_neg = squash(np.full(30, -1.3), variances)
    assert np.all(np.diff(probs_neg) > 0.0)
    assert probs_neg.max() < 0.5


def test_squash_links_differ():
    p_sqrt = squash(1.0, 3.0, link="sqrt")
    p_plain = squash(1.0, 3.0, link="plain")
    np.testing.assert_allclose(p_sqrt, ndtr(1.0 / 2.0), rtol=1e-15)
    np.testing.assert_allclose(p_plain, ndtr(1.0 / 4.0), rtol=1e-15)


def test_squash_validation():
    with pytest.raises(InputError):
        squash(0.0, -0.1)
    with pytest.raises(InputError):
        squash(0.0, 1.0, link="logit")


# ----------------------------------------------------------------------
# predict
# ----------------------------------------------------------------------


def test_predict_matches_direct_formula():
    x, y, cfg, result = _fitted_toy()
    rng = np.random.default_rng(1)
    x_star = rng.standard_normal((7, 2))
    pred = predict(result.state, x, cfg, x_star)

    _, chol, jit = factor_kernel_matrix(x, cfg)
    k_inv = cho_solve((chol, True), np.eye(len(x)))
    ks = cross_kernel(x_star, x, cfg)
    mean = ks @ k_inv @ result.state.mu
    w = k_inv @ ks.T
    var = (1.0 - np.einsum("tm,mt->t", ks, w)
           + np.einsum("mt,mt->t", w, result.state.zeta @ w))
    np.testing.assert_allclose(pred.mean, mean, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(pred.var, np.maximum(var, 0.0), rtol=1e-6,
                               atol=1e-10)
    np.testing.assert_allclose(pred.prob,
                               ndtr(mean / np.sqrt(1.0 + pred.var)),
                               rtol=1e-7)


def test_predict_at_training_points_reproduces_fitted_means():
    x, y, cfg, result = _fitted_toy()
    ws_kappa_mu = None
    from bsvm.nonlinear import build_workspace

    ws = build_workspace(x, x, cfg)
    ws_kappa_mu = ws.kappa @ result.state.mu
    pred = predict(result.state, x, cfg, x)
    np.testing.assert_allclose(pred.mean, ws_kappa_mu, rtol=1e-8,
                               atol=1e-10)


def test_predict_noiseless_limit():
    # zeta -> 0 and a test point at an inducing point: variance -> 0,
    # probability -> plain probit of the latent mean
    x, y, cfg, result = _fitted_toy()
    from bsvm.nonlinear import VariationalState

    tiny = VariationalState(result.state.mu, 1e-14 * np.eye(len(x)),
                            result.state.alpha)
    pred = predict(tiny, x, cfg, x[3:4])
    assert pred.var[0] < 1e-6
    np.testing.assert_allclose(pred.prob[0], ndtr(pred.mean[0]), rtol=1e-5)


def test_predict_validation():
    x, y, cfg, result = _fitted_toy()
    with pytest.raises(InputError):
        predict(result.state, x, cfg, np.zeros((2, 3)))
    with pytest.raises(InputError):
        predict(result.state, x, cfg, np.zeros(2))
    with pytest.raises(InputError):
        predict(result.state, x[:-1], cfg, np.zeros((2, 2)))


def test_decisions_threshold_ties_to_positive():
    pred = PredictiveDistribution(mean=np.zeros(3), var=np.zeros(3),
                                  prob=np.array([0.49, 0.5, 0.51]))
    np.testing.assert_array_equal(pred.decisions(), [-1.0, 1.0, 1.0])


# ----------------------------------------------------------------------
# metrics
# ----------------------------------------------------------------------


def test_error_rate_with_probabilities_and_scores():
    y = np.array([1.0, -1.0, 1.0, -1.0])
    assert error_rate(np.array([0.9, 0.1, 0.8, 0.2]), y) == 0.0
    assert error_rate(np.array([0.1, 0.9, 0.2, 0.8]), y) == 1.0
    assert error_rate(np.array([2.0, -3.0, -1.0, 0.5]), y) == 0.5
    # hard labels work too
    assert error_rate(np.array([1.0, -1.0, -1.0, -1.0]), y) == 0.25


def test_error_rate_accepts_01_labels():
    y01 = np.array([1, 0, 1, 0])
    assert error_rate(np.array([0.9, 0.1, 0.8, 0.2]), y01) == 0.0


def test_error_rate_validation():
    with pytest.raises(InputError):
        error_rate(np.array([0.5]), np.array([2.0]))
    with pytest.raises(InputError):
        error_rate(np.array([0.5, 0.5]), np.array([1.0]))


def test_brier_score_values():
    y = np.array([1.0, -1.0])
    assert brier_score(np.array([1.0, 0.0]), y) == 0.0
    assert brier_score(np.array([0.0, 1.0]), y) == 1.0
    np.testing.assert_allclose(brier_score(np.array([0.5, 0.5]), y), 0.25)
    np.testing.assert_allclose(
        brier_score(np.array([0.8, 0.3]), y),
        ((1.0 - 0.8) ** 2 + (0.0 - 0.3) ** 2) / 2.0)


def test_brier_score_validation():
    with pytest.raises(InputError):
        brier_score(np.array([1.2, 0.0]), np.array([1.0, -1.0]))


def test_auc_extremes_and_ties():
    y = np.array([1.0, 1.0, -1.0, -1.0])
    assert auc_score(np.array([4.0, 3.0, 2.0, 1.0]), y) == 1.0
    assert auc_score(np.array([1.0, 2.0, 3.0, 4.0]), y) == 0.0
    # all-tied scores: each pair counts half
    np.testing.assert_allclose(auc_score(np.ones(4), y), 0.5)


def test_auc_matches_pair_enumeration():
    rng = np.random.default_rng(2)
    scores = rng.standard_normal(40)
    scores[::5] = scores[0]  # inject ties
    y = np.where(rng.random(40) < 0.4, 1.0, -1.0)
    pos = scores[y > 0]
    neg = scores[y < 0]
    wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
    np.testing.assert_allclose(auc_score(scores, y),
                               wins / (len(pos) * len(neg)), rtol=1e-12)


def test_auc_label_flip_symmetry():
    rng = np.random.default_rng(3)
    scores = rng.standard_normal(30)
    y = np.where(rng.random(30) < 0.5, 1.0, -1.0)
    np.testing.assert_allclose(auc_score(scores, y),
                               1.0 - auc_score(scores, -y), rtol=1e-12)


def test_auc_needs_both_classes():
    with pytest.raises(InputError):
        auc_score(np.array([0.1, 0.2]), np.array([1.0, 1.0]))


def test_eval_report_summary():
    report = EvalReport(error_rates=[0.1, 0.2], briers=[0.05, 0.15],
                        aucs=[0.9, 0.8], fit_seconds=[1.0, 2.0],
                        n_folds=2, total_seconds=3.5)
    doc = report.to_dict()
    np.testing.assert_allclose(doc["error_rate"]["mean"], 0.15)
    np.testing.assert_allclose(doc["brier"]["mean"], 0.10)
    np.testing.assert_allclose(doc["auc"]["mean"], 0.85)
    np.testing.assert_allclose(report.fit_seconds_total, 3.0)
    text = str(report)
    assert "error" in text and "brier" in text.lower()

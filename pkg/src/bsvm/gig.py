"""Closed forms for the generalized inverse Gaussian family GIG(1/2, 1, alpha).

The latent scale of the hinge pseudolikelihood has full conditional

    lambda | alpha  ~  GIG(1/2, 1, alpha),
    p(lambda) propto lambda^{-1/2} exp(-(lambda + alpha/lambda) / 2),

whose half-integer order makes every quantity needed by the variational
updates available in closed form:

    E[1/lambda] = alpha^{-1/2}
    E[lambda]   = sqrt(alpha) + 1
    K_{1/2}(x)  = sqrt(pi / (2 x)) * exp(-x)

All functions are vectorized over ``alpha``.  Values of ``alpha`` produced
by the fitters are clamped to ``ALPHA_FLOOR`` before being used, so the
closed forms stay finite even for points that sit exactly on the margin.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InputError

# Smallest admissible alpha.  Below this the GIG moments are still finite
# but downstream divisions by sqrt(alpha) start to lose precision.
ALPHA_FLOOR = 1e-10


def clamp_alpha(alpha):
    """Clamp alpha from below at ``ALPHA_FLOOR``, preserving shape."""
    return np.maximum(np.asarray(alpha, dtype=float), ALPHA_FLOOR)


def _validate_positive(x, name):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise InputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise InputError(f"{name} must be finite and positive")
    return x


def e_inv_lambda(alpha):
    """E[1/lambda] for lambda ~ GIG(1/2, 1, alpha), equal to alpha^{-1/2}."""
    alpha = _validate_positive(alpha, "alpha")
    return alpha ** -0.5


def e_lambda(alpha):
    """E[lambda] for lambda ~ GIG(1/2, 1, alpha), equal to sqrt(alpha) + 1."""
    alpha = _validate_positive(alpha, "alpha")
    return np.sqrt(alpha) + 1.0


def log_bessel_half(x):
    """log K_{1/2}(x), the modified Bessel function of the second kind.

    Uses the closed form K_{1/2}(x) = sqrt(pi / (2 x)) exp(-x), which is
    exact for the half-integer order and stable for arbitrarily large x
    where ``scipy.special.kv`` underflows.
    """
    x = _validate_positive(x, "x")
    return 0.5 * np.log(np.pi / 2.0) - 0.5 * np.log(x) - x


def sample(alpha, rng, size=None):
    """Draw lambda ~ GIG(1/2, 1, alpha).

    The reciprocal 1/lambda follows GIG(-1/2, alpha, 1), which is the
    inverse Gaussian distribution with mean alpha^{-1/2} and shape 1, so a
    single Wald draw per sample suffices.

    Parameters
    ----------
    alpha : float or ndarray
        GIG parameter(s), must be positive.
    rng : numpy.random.Generator
        Source of randomness.
    size : int or tuple, optional
        Number of draws; must broadcast against ``alpha``.

    Returns
    -------
    ndarray
        Samples with shape ``size`` (or ``alpha.shape`` if size is None).
    """
    alpha = _validate_positive(alpha, "alpha")
    w = rng.wald(alpha ** -0.5, 1.0, size=size)
    # Guard against underflow for extreme alpha; Wald draws are positive.
    w = np.maximum(w, np.finfo(float).tiny)
    return 1.0 / w

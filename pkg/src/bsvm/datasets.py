"""Built-in datasets: synthetic generators and benchmark stand-ins.

``waveform`` is the classic three-class waveform generator (21 noisy
features built from shifted triangular basis functions), reduced to a
binary problem by grouping classes.  ``synthetic_breast_cancer`` and
``synthetic_heart`` are offline stand-ins for the small clinical
benchmarks of the same shape: they match the original sample counts,
dimensions, and class balance, and their class-conditional distributions
are calibrated so that a well-tuned kernel classifier lands in the error
band reported for the real data.  ``susy_like`` mimics the structure of
the large particle-physics benchmark: raw Gaussian "low-level" features
whose class-dependence is quadratic, plus derived "high-level" features
exposing parts of the discriminant.

``load_benchmark`` prefers a real CSV (label in the first column, either
0/1 or -1/+1, features in the remaining columns) from ``data_dir`` when
one is present, and otherwise falls back to the generators, so the same
evaluation code runs with or without the original files.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .data import Dataset, load_csv
from .exceptions import InputError

__all__ = [
    "two_moons",
    "waveform",
    "synthetic_breast_cancer",
    "synthetic_heart",
    "susy_like",
    "load_benchmark",
]


def two_moons(n: int, noise: float = 0.2, seed: int = 0) -> Dataset:
    """Two interleaved half-circles with Gaussian noise."""
    if n < 2:
        raise InputError("n must be at least 2")
    rng = np.random.default_rng(seed)
    n_pos = n // 2
    n_neg = n - n_pos
    t_pos = rng.uniform(0.0, np.pi, n_pos)
    t_neg = rng.uniform(0.0, np.pi, n_neg)
    pos = np.c_[np.cos(t_pos), np.sin(t_pos)]
    neg = np.c_[1.0 - np.cos(t_neg), 0.5 - np.sin(t_neg)]
    x = np.vstack([pos, neg]) + rng.normal(0.0, noise, (n, 2))
    y = np.r_[np.ones(n_pos), -np.ones(n_neg)]
    return Dataset(x=x, y=y)


# ----------------------------------------------------------------------
# waveform
# ----------------------------------------------------------------------


def _wave_bases() -> np.ndarray:
    j = np.arange(1, 22, dtype=float)
    h1 = np.maximum(6.0 - np.abs(j - 11.0), 0.0)
    h2 = np.maximum(6.0 - np.abs(j - 15.0), 0.0)   # h1 shifted right by 4
    h3 = np.maximum(6.0 - np.abs(j - 7.0), 0.0)    # h1 shifted left by 4
    return np.vstack([h1, h2, h3])


# class c mixes bases (a, b): x = u h_a + (1 - u) h_b + noise
_WAVE_PAIRS = ((0, 1), (0, 2), (1, 2))


def waveform(n: int, seed: int = 0,
             positive_classes: tuple = (0,)) -> Dataset:
    """Binary waveform data: 21 features, three latent wave classes.

    Each sample mixes two of three triangular waveforms with a uniform
    weight and adds unit Gaussian noise per feature; the binary label is
    +1 when the latent class is in ``positive_classes``.
    """
    if n < 2:
        raise InputError("n must be at least 2")
    pos = set(positive_classes)
    if not pos or not pos <= {0, 1, 2}:
        raise InputError("positive_classes must be a non-empty subset of {0,1,2}")
    rng = np.random.default_rng(seed)
    bases = _wave_bases()
    cls = rng.integers(0, 3, size=n)
    u = rng.uniform(0.0, 1.0, size=n)[:, None]
    a = np.array([_WAVE_PAIRS[c][0] for c in cls])
    b = np.array([_WAVE_PAIRS[c][1] for c in cls])
    x = u * bases[a] + (1.0 - u) * bases[b] + rng.standard_normal((n, 21))
    y = np.where(np.isin(cls, list(pos)), 1.0, -1.0)
    return Dataset(x=x, y=y)


# ----------------------------------------------------------------------
# clinical benchmark stand-ins
# ----------------------------------------------------------------------


def _two_gaussian_classes(n, d, d_informative, gap, pos_scale, pos_fraction,
                          rng):
    """Isotropic Gaussian class-conditionals on an informative subspace.

    The negative class is N(0, I) on all d features; the positive class
    is shifted by ``gap`` along the diagonal of the informative subspace
    and scaled by ``pos_scale`` there (unequal covariances make the
    optimal boundary quadratic, so a nonlinear classifier has an edge).
    """
    y = np.where(rng.random(n) < pos_fraction, 1.0, -1.0)
    x = rng.standard_normal((n, d))
    shift = gap / np.sqrt(d_informative)
    pos = y > 0
    x[np.ix_(pos, np.arange(d_informative))] *= pos_scale
    x[np.ix_(pos, np.arange(d_informative))] += shift
    return x, y


def synthetic_breast_cancer(n: int = 263, seed: int = 0) -> Dataset:
    """Stand-in matching the recurrence benchmark's shape (263 x 9,
    about 30% positives) and difficulty (Bayes error near 0.21)."""
    rng = np.random.default_rng(seed)
    x, y = _two_gaussian_classes(n, d=9, d_informative=3, gap=0.95,
                                 pos_scale=1.5, pos_fraction=78.0 / 263.0,
                                 rng=rng)
    return Dataset(x=x, y=y)


def synthetic_heart(n: int = 270, seed: int = 0) -> Dataset:
    """Stand-in matching the cardiac benchmark's shape (270 x 13, about
    44% positives) and difficulty (Bayes error near 0.12)."""
    rng = np.random.default_rng(seed)
    x, y = _two_gaussian_classes(n, d=13, d_informative=5, gap=2.40,
                                 pos_scale=1.3, pos_fraction=120.0 / 270.0,
                                 rng=rng)
    return Dataset(x=x, y=y)


# ----------------------------------------------------------------------
# large-scale physics-flavored benchmark stand-in
# ----------------------------------------------------------------------


def susy_like(n: int, seed: int = 0, noise: float = 2.6) -> Dataset:
    """Stand-in for the particle-physics benchmark: 18 features.

    Eight raw N(0,1) "low-level" features carry a quadratic class
    discriminant; ten "high-level" features expose noisy nonlinear
    combinations of them (squares, products, radii), the way derived
    kinematic quantities do.  Labels are the sign of the discriminant
    plus Gaussian noise, giving smooth class overlap with an optimal AUC
    near 0.87.
    """
    if n < 2:
        raise InputError("n must be at least 2")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 8))
    score = (z[:, 0]**2 + z[:, 1]**2 - z[:, 2]**2 - z[:, 3]**2
             + 1.2 * (z[:, 4] + z[:, 5]))
    y = np.where(score + noise * rng.standard_normal(n) > 0.2, 1.0, -1.0)
    eps = 0.3 * rng.standard_normal((n, 10))
    high = np.c_[
        z[:, 0]**2 + eps[:, 0],
        z[:, 1]**2 + eps[:, 1],
        z[:, 2]**2 + eps[:, 2],
        z[:, 3]**2 + eps[:, 3],
        z[:, 0] * z[:, 1] + eps[:, 4],
        z[:, 2] * z[:, 3] + eps[:, 5],
        np.sqrt(z[:, 0]**2 + z[:, 1]**2) + eps[:, 6],
        np.sqrt(z[:, 2]**2 + z[:, 3]**2) + eps[:, 7],
        z[:, 4] + z[:, 5] + eps[:, 8],
        z[:, 6] - z[:, 7] + eps[:, 9],
    ]
    return Dataset(x=np.c_[z, high], y=y)


# ----------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------

_GENERATORS = {
    "breast-cancer": lambda seed: synthetic_breast_cancer(seed=seed),
    "heart": lambda seed: synthetic_heart(seed=seed),
    "waveform": lambda seed: waveform(5000, seed=seed),
    "susy": lambda seed: susy_like(100_000, seed=seed),
}


def load_benchmark(name: str, data_dir=None, seed: int = 0) -> Dataset:
    """Load a benchmark by name, preferring real data when available.

    Looks for ``<name>.csv`` (label first, features after) under
    ``data_dir`` (or the ``BSVM_DATA_DIR`` environment variable); falls
    back to the built-in generator for that name.
    """
    if name not in _GENERATORS:
        raise InputError(
            f"unknown benchmark {name!r}; available: {sorted(_GENERATORS)}"
        )
    if data_dir is None:
        data_dir = os.environ.get("BSVM_DATA_DIR")
    if data_dir is not None:
        path = Path(data_dir) / f"{name}.csv"
        if path.exists():
            return load_csv(path, label_col=0)
    return _GENERATORS[name](seed)

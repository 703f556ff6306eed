"""Inducing point selection: uniform subsets and k-means centroids.

The inducing inputs Z stay fixed during variational optimization; only
the kernel hyperparameters move.  Both selectors are deterministic given
their seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError

__all__ = ["InducingSet", "select_random", "select_kmeans"]


@dataclass
class InducingSet:
    """Chosen inducing inputs plus provenance for reproducibility."""

    z: np.ndarray
    provenance: str
    seed: int
    wcss_trace: np.ndarray | None = None


def _check(x, m: int):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError("x must be a non-empty 2-D array")
    if not 1 <= m <= x.shape[0]:
        raise InputError(f"need 1 <= m <= n, got m={m}, n={x.shape[0]}")
    return x


def select_random(x, m: int, seed: int = 0) -> InducingSet:
    """m distinct rows of x, drawn uniformly without replacement."""
    x = _check(x, m)
    rng = np.random.default_rng(seed)
    idx = rng.choice(x.shape[0], size=m, replace=False)
    return InducingSet(z=x[idx].copy(), provenance="random-subset", seed=seed)


def _sq_dists_to(x, centers):
    xx = np.sum(x * x, axis=1)
    cc = np.sum(centers * centers, axis=1)
    d2 = xx[:, None] + cc[None, :] - 2.0 * (x @ centers.T)
    return np.maximum(d2, 0.0)


def _kmeanspp_seed(x, m, rng):
    """D^2-weighted seeding: each new center is drawn with probability
    proportional to the squared distance to the nearest chosen center."""
    n = x.shape[0]
    centers = np.empty((m, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = _sq_dists_to(x, centers[:1]).ravel()
    for j in range(1, m):
        total = float(d2.sum())
        if total <= 0.0:
            # remaining points coincide with chosen centers
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, _sq_dists_to(x, centers[j:j + 1]).ravel())
    return centers


def select_kmeans(x, m: int, seed: int = 0,
                  max_iters: int = 100) -> InducingSet:
    """k-means centroids with D^2 seeding and Lloyd refinement.

    The within-cluster sum of squares recorded after each assignment step
    is non-increasing.  A cluster that loses all its points is re-seeded
    at the point currently farthest from its assigned centroid.
    """
    x = _check(x, m)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_seed(x, m, rng)
    trace = []
    for _ in range(max_iters):
        d2 = _sq_dists_to(x, centers)
        labels = np.argmin(d2, axis=1)
        wcss = float(np.sum(d2[np.arange(len(x)), labels]))
        trace.append(wcss)
        new_centers = centers.copy()
        for j in range(m):
            mask = labels == j
            if np.any(mask):
                new_centers[j] = x[mask].mean(axis=0)
            else:
                farthest = int(np.argmax(d2[np.arange(len(x)), labels]))
                new_centers[j] = x[farthest]
                labels[farthest] = j
        if np.allclose(new_centers, centers, rtol=0.0, atol=1e-12):
            centers = new_centers
            break
        centers = new_centers
    return InducingSet(z=centers, provenance="kmeans", seed=seed,
                       wcss_trace=np.asarray(trace))

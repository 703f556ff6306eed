"""Model persistence: a single JSON document per trained model.

Schema (``format_version`` 1)::

    {
      "format_version": 1,
      "link": "sqrt" | "plain",
      "kernel": {"components": [{"family", "theta", "gamma"}...], "jitter"}
              | {"family": "linear-primal"},
      "inducing": [[...]...] | null,      # m x d rows (null for linear)
      "mu": [...],                        # m (or d) entries
      "zeta": [[...]...],                 # m x m (or d x d) rows
      "prior_sigma": [[...]...],          # linear-primal only
      "standardize": {"mean": [...], "scale": [...]} | null
    }

The kernel entry ``{"family": "linear-primal"}`` marks the primal linear
model, in which ``mu`` and ``zeta`` are d-dimensional and ``inducing``
is null.  Every float is written with 17 significant decimal digits, so
a save/load round-trip reproduces all values bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace
from typing import Optional

import numpy as np

from .data import StandardizeParams, standardize_apply
from .exceptions import InputError
from .kernels import KernelComponent, KernelConfig
from .linear import predict_linear
from .prediction import LINKS, PredictiveDistribution, predict

__all__ = [
    "FORMAT_VERSION",
    "SparseGPModel",
    "LinearPrimalModel",
    "save_model",
    "load_model",
    "model_to_document",
    "model_from_document",
]

FORMAT_VERSION = 1


@dataclass
class SparseGPModel:
    """A trained sparse-GP classifier: kernel, inducing set, posterior."""

    config: KernelConfig
    z: np.ndarray
    mu: np.ndarray
    zeta: np.ndarray
    link: str = "sqrt"
    standardize: Optional[StandardizeParams] = None

    def predict(self, x_star) -> PredictiveDistribution:
        x_star = np.asarray(x_star, dtype=float)
        if self.standardize is not None:
            x_star = standardize_apply(self.standardize, x_star)
        state = SimpleNamespace(mu=self.mu, zeta=self.zeta)
        return predict(state, self.z, self.config, x_star, link=self.link)


@dataclass
class LinearPrimalModel:
    """A trained primal linear classifier: Gaussian posterior over weights."""

    mu: np.ndarray
    zeta: np.ndarray
    sigma: np.ndarray
    link: str = "sqrt"
    standardize: Optional[StandardizeParams] = None

    def predict(self, x_star) -> PredictiveDistribution:
        x_star = np.asarray(x_star, dtype=float)
        if self.standardize is not None:
            x_star = standardize_apply(self.standardize, x_star)
        state = SimpleNamespace(mu=self.mu, zeta=self.zeta)
        return predict_linear(state, x_star, link=self.link)


# ----------------------------------------------------------------------
# JSON writing with fixed-precision floats
# ----------------------------------------------------------------------


def _fmt_float(v: float) -> str:
    if not math.isfinite(v):
        raise InputError("model contains non-finite values; refusing to save")
    return format(float(v), ".17g")


def _write(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(", ")
            _write(item, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _write(val, out)
        out.append("}")
    else:
        raise InputError(f"cannot serialize object of type {type(obj).__name__}")


def _dumps(document: dict) -> str:
    out: list = []
    _write(document, out)
    return "".join(out)


def _vector(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def _matrix(a) -> list:
    a = np.asarray(a, dtype=float)
    return [[float(v) for v in row] for row in a]


def _standardize_doc(params: Optional[StandardizeParams]):
    if params is None:
        return None
    return {"mean": _vector(params.mean), "scale": _vector(params.scale)}


def model_to_document(model) -> dict:
    """Build the JSON-ready document for a trained model."""
    if isinstance(model, SparseGPModel):
        kernel = {
            "components": [
                {"family": c.family, "theta": float(c.theta),
                 "gamma": float(c.gamma)}
                for c in model.config.components
            ],
            "jitter": float(model.config.jitter),
        }
        return {
            "format_version": FORMAT_VERSION,
            "link": model.link,
            "kernel": kernel,
            "inducing": _matrix(model.z),
            "mu": _vector(model.mu),
            "zeta": _matrix(model.zeta),
            "standardize": _standardize_doc(model.standardize),
        }
    if isinstance(model, LinearPrimalModel):
        return {
            "format_version": FORMAT_VERSION,
            "link": model.link,
            "kernel": {"family": "linear-primal"},
            "inducing": None,
            "mu": _vector(model.mu),
            "zeta": _matrix(model.zeta),
            "prior_sigma": _matrix(model.sigma),
            "standardize": _standardize_doc(model.standardize),
        }
    raise InputError(f"cannot serialize object of type {type(model).__name__}")


def save_model(model, path) -> None:
    """Write a model to ``path`` as a single JSON document."""
    Path(path).write_text(_dumps(model_to_document(model)) + "\n",
                          encoding="utf-8")


# ----------------------------------------------------------------------
# loading
# ----------------------------------------------------------------------


def _require(document: dict, key: str):
    if key not in document:
        raise InputError(f"model document missing field {key!r}")
    return document[key]


def _load_standardize(doc) -> Optional[StandardizeParams]:
    if doc is None:
        return None
    mean = np.asarray(_require(doc, "mean"), dtype=float)
    scale = np.asarray(_require(doc, "scale"), dtype=float)
    if mean.shape != scale.shape:
        raise InputError("standardize mean and scale differ in length")
    return StandardizeParams(mean=mean, scale=scale)


def _check_link(link) -> str:
    if link not in LINKS:
        raise InputError(f"unknown link {link!r}; expected one of {LINKS}")
    return link


def model_from_document(document: dict):
    """Reconstruct a model object from a parsed JSON document."""
    if not isinstance(document, dict):
        raise InputError("model document must be a JSON object")
    version = _require(document, "format_version")
    if version != FORMAT_VERSION:
        raise InputError(
            f"unsupported model format version {version!r} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    kernel_doc = _require(document, "kernel")
    link = _check_link(_require(document, "link"))
    mu = np.asarray(_require(document, "mu"), dtype=float)
    zeta = np.asarray(_require(document, "zeta"), dtype=float)
    if zeta.ndim != 2 or zeta.shape != (len(mu), len(mu)):
        raise InputError("zeta shape does not match mu")
    standardize = _load_standardize(document.get("standardize"))

    if kernel_doc.get("family") == "linear-primal":
        sigma = np.asarray(_require(document, "prior_sigma"), dtype=float)
        if sigma.shape != zeta.shape:
            raise InputError("prior_sigma shape does not match zeta")
        return LinearPrimalModel(mu=mu, zeta=zeta, sigma=sigma, link=link,
                                 standardize=standardize)

    components = tuple(
        KernelComponent(family=c["family"], theta=float(c.get("theta", 1.0)),
                        gamma=float(c.get("gamma", 1.0)))
        for c in _require(kernel_doc, "components")
    )
    config = KernelConfig(components=components,
                          jitter=float(_require(kernel_doc, "jitter")))
    z = np.asarray(_require(document, "inducing"), dtype=float)
    if z.ndim != 2 or z.shape[0] != len(mu):
        raise InputError("inducing point count does not match mu")
    return SparseGPModel(config=config, z=z, mu=mu, zeta=zeta, link=link,
                         standardize=standardize)


def load_model(path):
    """Read a model JSON document written by :func:`save_model`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_document(document)

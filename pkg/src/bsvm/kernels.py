"""Kernel configurations, Gram matrices, and analytic kernel derivatives.

Supported families (all defined on R^d):

    rbf     k(x, z) = exp(-||x - z|| / theta^2)       (unsquared distance)
    sqexp   k(x, z) = exp(-||x - z||^2 / (2 theta^2))
    linear  k(x, z) = x . z

plus non-negative weighted sums  k = sum_j gamma_j k_j  of the above.

``build_gram`` produces everything the sparse variational model needs:
the inducing-point matrix K_mm (kept exactly symmetric), its jittered
Cholesky factor, the cross matrix K_nm, and the diagonal of
K_nn - K_nm K_mm^{-1} K_mn.  Jitter starts at ``config.jitter`` times the
mean diagonal of K_mm and is escalated tenfold on Cholesky failure up to
1e-2 times the mean diagonal, after which a ``NumericalError`` is raised.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, cholesky, LinAlgError

from .exceptions import InputError, NumericalError, NumericalWarning

FAMILIES = ("rbf", "sqexp", "linear")

# Escalation ceiling for jitter, as a multiple of mean(diag(K_mm)).
_JITTER_CEILING = 1e-2


@dataclass(frozen=True)
class KernelComponent:
    """One summand of a (possibly weighted-sum) kernel."""

    family: str
    theta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}")
        if self.family != "linear" and not self.theta > 0.0:
            raise InputError("length scale theta must be positive")
        if self.gamma < 0.0:
            raise InputError("component weight gamma must be non-negative")


@dataclass(frozen=True)
class KernelConfig:
    """A kernel: one component or a non-negative weighted sum of components."""

    components: tuple[KernelComponent, ...]
    jitter: float = 1e-8

    def __post_init__(self):
        if len(self.components) == 0:
            raise InputError("kernel needs at least one component")
        if not 0.0 < self.jitter < 1.0:
            raise InputError("jitter factor must lie in (0, 1)")
        object.__setattr__(self, "components", tuple(self.components))

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def rbf(cls, theta: float = 1.0, jitter: float = 1e-8) -> "KernelConfig":
        return cls((KernelComponent("rbf", theta=theta),), jitter=jitter)

    @classmethod
    def sqexp(cls, theta: float = 1.0, jitter: float = 1e-8) -> "KernelConfig":
        return cls((KernelComponent("sqexp", theta=theta),), jitter=jitter)

    @classmethod
    def linear(cls, jitter: float = 1e-8) -> "KernelConfig":
        return cls((KernelComponent("linear"),), jitter=jitter)

    @classmethod
    def weighted_sum(cls, components, jitter: float = 1e-8) -> "KernelConfig":
        return cls(tuple(components), jitter=jitter)

    # ------------------------------------------------------------------
    # hyperparameter bookkeeping
    # ------------------------------------------------------------------

    def hyperparameter_ids(self) -> tuple[str, ...]:
        """Identifiers of the tunable hyperparameters.

        Length scales are always tunable; component weights only when the
        kernel is an actual sum (a single component's weight is redundant
        with the overall scale of the problem).
        """
        ids = []
        for j, comp in enumerate(self.components):
            if comp.family != "linear":
                ids.append(f"theta{j}")
        if len(self.components) > 1:
            ids.extend(f"gamma{j}" for j in range(len(self.components)))
        return tuple(ids)

    def get(self, which: str) -> float:
        kind, j = _parse_param(self, which)
        comp = self.components[j]
        return comp.theta if kind == "theta" else comp.gamma

    def with_value(self, which: str, value: float) -> "KernelConfig":
        kind, j = _parse_param(self, which)
        comp = replace(self.components[j], **{kind: float(value)})
        comps = list(self.components)
        comps[j] = comp
        return replace(self, components=tuple(comps))


def _parse_param(config: KernelConfig, which: str) -> tuple[str, int]:
    """Resolve a parameter id like 'theta0' / 'gamma2' / bare 'theta'."""
    name = which.strip()
    for kind in ("theta", "gamma"):
        if name == kind:
            if len(config.components) != 1:
                raise InputError(
                    f"ambiguous parameter {which!r} for a multi-component kernel"
                )
            name = kind + "0"
        if name.startswith(kind) and name[len(kind):].isdigit():
            j = int(name[len(kind):])
            if j >= len(config.components):
                raise InputError(f"no component {j} in kernel")
            if kind == "theta" and config.components[j].family == "linear":
                raise InputError("linear kernel component has no length scale")
            return kind, j
    raise InputError(f"unknown kernel parameter {which!r}")


# ----------------------------------------------------------------------
# kernel evaluation
# ----------------------------------------------------------------------


def _as_points(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise InputError(f"{name} must be a non-empty 2-D array")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} contains non-finite values")
    return x


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared distances, clamped at zero against round-off."""
    aa = np.sum(a * a, axis=1)
    bb = np.sum(b * b, axis=1)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _component_cross(comp: KernelComponent, a, b) -> np.ndarray:
    if comp.family == "linear":
        return comp.gamma * (a @ b.T)
    d2 = _sq_dists(a, b)
    if comp.family == "rbf":
        return comp.gamma * np.exp(-np.sqrt(d2) / comp.theta**2)
    return comp.gamma * np.exp(-d2 / (2.0 * comp.theta**2))


def _component_diag(comp: KernelComponent, x) -> np.ndarray:
    if comp.family == "linear":
        return comp.gamma * np.sum(x * x, axis=1)
    return np.full(x.shape[0], comp.gamma)


def cross_kernel(a, b, config: KernelConfig) -> np.ndarray:
    """Kernel matrix k(a_i, b_j) of shape (len(a), len(b))."""
    a = _as_points(a, "a")
    b = _as_points(b, "b")
    if a.shape[1] != b.shape[1]:
        raise InputError(
            f"dimension mismatch: {a.shape[1]} vs {b.shape[1]} features"
        )
    out = np.zeros((a.shape[0], b.shape[0]))
    for comp in config.components:
        out += _component_cross(comp, a, b)
    return out


def kernel_diag(x, config: KernelConfig) -> np.ndarray:
    """Diagonal k(x_i, x_i) without forming the full matrix."""
    x = _as_points(x, "x")
    out = np.zeros(x.shape[0])
    for comp in config.components:
        out += _component_diag(comp, x)
    return out


def eval_kernel(x1, x2, config: KernelConfig) -> float:
    """Single kernel value k(x1, x2) for 1-D inputs."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    return float(cross_kernel(x1, x2, config)[0, 0])


# ----------------------------------------------------------------------
# Gram matrices for the sparse model
# ----------------------------------------------------------------------


@dataclass
class GramMatrices:
    """Kernel matrices shared by the sparse variational updates.

    Attributes
    ----------
    k_mm : (m, m) raw inducing kernel matrix, exactly symmetric.
    chol_mm : lower Cholesky factor of ``k_mm + jitter * I``.
    k_nm : (n, m) cross kernel matrix.
    ktilde_diag : (n,) diagonal of K_nn - K_nm (K_mm + jitter I)^{-1} K_mn,
        clamped at zero.
    jitter : the jitter actually added to ``k_mm`` before factoring.
    """

    k_mm: np.ndarray
    chol_mm: np.ndarray
    k_nm: np.ndarray
    ktilde_diag: np.ndarray
    jitter: float

    @property
    def n(self) -> int:
        return self.k_nm.shape[0]

    @property
    def m(self) -> int:
        return self.k_mm.shape[0]

    @property
    def logdet_mm(self) -> float:
        """log det of the jittered inducing matrix."""
        return 2.0 * float(np.sum(np.log(np.diag(self.chol_mm))))

    def solve_mm(self, b: np.ndarray) -> np.ndarray:
        """Solve (K_mm + jitter I) x = b."""
        return cho_solve((self.chol_mm, True), b)


def factor_kernel_matrix(z, config: KernelConfig):
    """Cholesky-factor k(z, z) with escalating jitter.

    Returns
    -------
    (k_zz, chol, jitter) : raw symmetric kernel matrix, lower Cholesky
        factor of ``k_zz + jitter * I``, and the jitter used.
    """
    z = _as_points(z, "z")
    k_zz = cross_kernel(z, z, config)
    k_zz = 0.5 * (k_zz + k_zz.T)
    scale = float(np.mean(np.diag(k_zz)))
    if scale <= 0.0:
        scale = 1.0
    jit = config.jitter * scale
    ceiling = _JITTER_CEILING * scale
    while True:
        try:
            chol = cholesky(k_zz + jit * np.eye(len(k_zz)), lower=True)
            return k_zz, chol, jit
        except LinAlgError:
            jit *= 10.0
            if jit > ceiling * (1.0 + 1e-12):
                raise NumericalError(
                    "inducing kernel matrix is not positive definite even "
                    f"with jitter {ceiling:.3e}; inducing points may coincide"
                ) from None


def build_gram(x, z, config: KernelConfig) -> GramMatrices:
    """Assemble the Gram matrices for inputs ``x`` and inducing points ``z``."""
    x = _as_points(x, "x")
    z = _as_points(z, "z")
    if x.shape[1] != z.shape[1]:
        raise InputError(
            f"x has {x.shape[1]} features but z has {z.shape[1]}"
        )
    k_mm, chol, jit = factor_kernel_matrix(z, config)
    k_nm = cross_kernel(x, z, config)
    # ktilde_ii = k(x_i, x_i) - K_nm_i (K_mm + jit I)^{-1} K_nm_i^T
    from scipy.linalg import solve_triangular

    v = solve_triangular(chol, k_nm.T, lower=True)
    ktilde = kernel_diag(x, config) - np.sum(v * v, axis=0)
    floor = -1e-6 * max(1.0, float(np.max(kernel_diag(x, config))))
    if np.any(ktilde < floor):
        warnings.warn(
            "conditional kernel variances went noticeably negative; "
            "clamping to zero",
            NumericalWarning,
        )
    ktilde = np.maximum(ktilde, 0.0)
    return GramMatrices(k_mm=k_mm, chol_mm=chol, k_nm=k_nm,
                        ktilde_diag=ktilde, jitter=jit)


# ----------------------------------------------------------------------
# analytic derivatives with respect to hyperparameters
# ----------------------------------------------------------------------


@dataclass
class KernelGrads:
    """Derivatives of the Gram blocks with respect to one hyperparameter."""

    j_mm: np.ndarray
    j_nm: np.ndarray
    j_nn_diag: np.ndarray


def _component_theta_grad(comp: KernelComponent, a, b) -> np.ndarray:
    d2 = _sq_dists(a, b)
    if comp.family == "rbf":
        r = np.sqrt(d2)
        base = np.exp(-r / comp.theta**2)
        return comp.gamma * base * (2.0 * r / comp.theta**3)
    if comp.family == "sqexp":
        base = np.exp(-d2 / (2.0 * comp.theta**2))
        return comp.gamma * base * (d2 / comp.theta**3)
    raise InputError("linear kernel component has no length scale")


def kernel_grad(x, z, config: KernelConfig, which: str) -> KernelGrads:
    """Derivative of (K_mm, K_nm, diag K_nn) with respect to one parameter.

    ``which`` is an id from ``config.hyperparameter_ids()`` (or a bare
    'theta'/'gamma' for single-component kernels).
    """
    x = _as_points(x, "x")
    z = _as_points(z, "z")
    kind, j = _parse_param(config, which)
    comp = config.components[j]
    if kind == "theta":
        j_mm = _component_theta_grad(comp, z, z)
        j_nm = _component_theta_grad(comp, x, z)
        j_nn = np.zeros(x.shape[0])
    else:
        unit = replace(comp, gamma=1.0)
        j_mm = _component_cross(unit, z, z)
        j_nm = _component_cross(unit, x, z)
        j_nn = _component_diag(unit, x)
    j_mm = 0.5 * (j_mm + j_mm.T)
    return KernelGrads(j_mm=j_mm, j_nm=j_nm, j_nn_diag=j_nn)

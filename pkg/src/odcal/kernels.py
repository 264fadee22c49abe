"""Stationary covariance kernels with per-dimension (ARD) lengthscales.

All kernels are functions of the scaled distance
r = sqrt(sum_d ((x_d - x'_d) / l_d)^2):

    matern32: (1 + sqrt(3) r) exp(-sqrt(3) r)
    matern52: (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r)
    rbf:      exp(-r^2 / 2)

scaled by the signal variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

KERNEL_KINDS = ("matern32", "matern52", "rbf")
LENGTHSCALE_BOUNDS = (0.005, 4.0)

_SQRT3 = np.sqrt(3.0)
_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class Kernel:
    kind: str
    lengthscales: np.ndarray
    signal_var: float

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        ls = np.asarray(self.lengthscales, dtype=float)
        if ls.ndim != 1 or ls.size < 1:
            raise ValidationError("lengthscales must be a 1-d vector")
        lo, hi = LENGTHSCALE_BOUNDS
        if np.any(ls < lo - 1e-12) or np.any(ls > hi + 1e-12):
            raise ValidationError(f"lengthscales must lie in [{lo}, {hi}]")
        if self.signal_var <= 0:
            raise ValidationError("signal variance must be positive")
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)

    @property
    def dimension(self) -> int:
        return self.lengthscales.shape[0]


def scaled_sq_dists(x1: np.ndarray, x2: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    """Matrix of r^2 values between rows of x1 and rows of x2."""
    a = x1 / lengthscales
    b = x2 / lengthscales
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    return np.maximum(sq, 0.0)


def base_correlation(kind: str, r2: np.ndarray) -> np.ndarray:
    """Unit-variance correlation as a function of squared scaled distance."""
    if kind == "rbf":
        return np.exp(-0.5 * r2)
    r = np.sqrt(r2)
    if kind == "matern32":
        return (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)
    if kind == "matern52":
        return (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-_SQRT5 * r)
    raise ValidationError(f"unknown kernel kind {kind!r}")


def base_correlation_grad_r2(kind: str, r2: np.ndarray) -> np.ndarray:
    """d(base correlation)/d(r^2); smooth at r = 0 for every kind."""
    if kind == "rbf":
        return -0.5 * np.exp(-0.5 * r2)
    r = np.sqrt(r2)
    if kind == "matern32":
        return -1.5 * np.exp(-_SQRT3 * r)
    if kind == "matern52":
        return -(5.0 / 6.0) * (1.0 + _SQRT5 * r) * np.exp(-_SQRT5 * r)
    raise ValidationError(f"unknown kernel kind {kind!r}")


def kernel_matrix(kernel: Kernel, x1: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = x1 if x2 is None else np.atleast_2d(np.asarray(x2, dtype=float))
    if x1.shape[1] != kernel.dimension or x2.shape[1] != kernel.dimension:
        raise ValidationError("input dimension does not match kernel lengthscales")
    r2 = scaled_sq_dists(x1, x2, kernel.lengthscales)
    return kernel.signal_var * base_correlation(kernel.kind, r2)


def kernel_eval(kernel: Kernel, x1: np.ndarray, x2: np.ndarray) -> float:
    """Covariance between two single points."""
    x1 = np.asarray(x1, dtype=float).reshape(1, -1)
    x2 = np.asarray(x2, dtype=float).reshape(1, -1)
    return float(kernel_matrix(kernel, x1, x2)[0, 0])

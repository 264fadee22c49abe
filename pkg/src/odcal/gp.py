"""Gaussian process regression: marginal-likelihood fitting, posterior
prediction, joint posterior sampling.

Inputs live in the unit hypercube and outputs are standardized to zero
mean / unit variance internally. Hyperparameters (ARD lengthscales,
signal variance, noise variance) are optimized in log space with
analytic gradients via multi-restart L-BFGS-B; an optional half-Cauchy
penalty on inverse lengthscales yields MAP sparsity (long lengthscales
on inactive dimensions).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize
from scipy.linalg import cho_solve, solve_triangular

from .errors import (
    InsufficientDataError,
    NumericalError,
    StateError,
    ValidationError,
)
from .kernels import (
    LENGTHSCALE_BOUNDS,
    Kernel,
    base_correlation,
    base_correlation_grad_r2,
    kernel_matrix,
)
from .sobol import CandidateGenerator

NOISE_BOUNDS = (1e-8, 1e-3)
SIGNAL_VAR_BOUNDS = (1e-6, 1e3)
JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def cholesky_with_jitter(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    for jitter in JITTER_LADDER:
        try:
            k = matrix if jitter == 0.0 else matrix + jitter * np.eye(len(matrix))
            return np.linalg.cholesky(k), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("matrix not positive definite after jitter ladder")


def default_lengthscale(dim: int) -> float:
    """Dimension-scaled initial lengthscale, clipped to the kernel bounds."""
    return float(np.clip(max(0.05 * np.sqrt(dim), 0.1), *LENGTHSCALE_BOUNDS))


@dataclass(frozen=True)
class GPModel:
    """Fitted surrogate; immutable, safe for concurrent queries."""

    kernel: Kernel
    noise_var: float
    x_train: np.ndarray
    y_mean: float
    y_std: float
    y_train_std: np.ndarray   # standardized targets
    chol: np.ndarray
    alpha: np.ndarray         # (K + noise I)^{-1} y, standardized space
    jitter: float

    def __post_init__(self):
        lo, hi = NOISE_BOUNDS
        if not (lo - 1e-15 <= self.noise_var <= hi + 1e-15):
            raise ValidationError(f"noise variance must lie in [{lo}, {hi}]")

    @property
    def num_train(self) -> int:
        return self.x_train.shape[0]

    def _check_query(self, x: np.ndarray) -> np.ndarray:
        if self.chol is None or self.alpha is None:
            raise StateError("model has no factorization; fit it first")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.kernel.dimension:
            raise ValidationError("query dimension mismatch")
        return x

    def posterior(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and variance in standardized output space."""
        x = self._check_query(x)
        k_star = kernel_matrix(self.kernel, x, self.x_train)
        mean = k_star @ self.alpha
        v = solve_triangular(self.chol, k_star.T, lower=True)
        var = self.kernel.signal_var - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def posterior_raw(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and variance in the original output units."""
        mean, var = self.posterior(x)
        return mean * self.y_std + self.y_mean, var * self.y_std**2

    def posterior_joint(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean vector and full covariance (standardized space)."""
        x = self._check_query(x)
        k_star = kernel_matrix(self.kernel, x, self.x_train)
        mean = k_star @ self.alpha
        v = solve_triangular(self.chol, k_star.T, lower=True)
        cov = kernel_matrix(self.kernel, x) - v.T @ v
        return mean, 0.5 * (cov + cov.T)

    def sample_posterior(self, x: np.ndarray, draws: int, seed: int) -> np.ndarray:
        """Joint Gaussian posterior draws, shape (draws, len(x)); seeded."""
        x = self._check_query(x)
        if x.shape[0] < 1:
            raise ValidationError("query set must be non-empty")
        mean, cov = self.posterior_joint(x)
        np.fill_diagonal(cov, np.maximum(np.diag(cov), 0.0))
        if float(np.max(np.diag(cov))) < 1e-14:
            return np.tile(mean, (draws, 1))
        chol, _ = cholesky_with_jitter(cov)
        z = np.random.default_rng(seed).standard_normal((draws, x.shape[0]))
        return mean + z @ chol.T

    def fantasize(self, x_new: np.ndarray) -> "GPModel":
        """Condition on the posterior mean at x_new via a rank-1 Cholesky update.

        No hyperparameter refit; used for sequential-greedy batch proposals.
        """
        x_new = self._check_query(x_new)
        mean, _ = self.posterior(x_new)
        k_vec = kernel_matrix(self.kernel, self.x_train, x_new)[:, 0]
        kappa = (
            self.kernel.signal_var + self.noise_var + self.jitter
        )
        l_row = solve_triangular(self.chol, k_vec, lower=True)
        d2 = kappa - l_row @ l_row
        d = np.sqrt(max(d2, 1e-12))
        n = self.num_train
        chol = np.zeros((n + 1, n + 1))
        chol[:n, :n] = self.chol
        chol[n, :n] = l_row
        chol[n, n] = d
        x_train = np.vstack([self.x_train, x_new])
        y_std = np.append(self.y_train_std, mean[0])
        alpha = cho_solve((chol, True), y_std)
        return replace(
            self,
            x_train=x_train,
            y_train_std=y_std,
            chol=chol,
            alpha=alpha,
        )


# ---------------------------------------------------------------------------
# Marginal likelihood

def _unpack(theta: np.ndarray, dim: int) -> tuple[np.ndarray, float, float]:
    ls = np.exp(theta[:dim])
    signal_var = float(np.exp(theta[dim]))
    noise_var = float(np.exp(theta[dim + 1]))
    return ls, signal_var, noise_var


def log_marginal_likelihood(
    theta: np.ndarray,
    x: np.ndarray,
    y_std: np.ndarray,
    kind: str,
    sq_diffs: np.ndarray,
    sparsity_weight: float = 0.0,
    sparsity_scale: float = 0.1,
) -> tuple[float, np.ndarray]:
    """Log marginal likelihood (plus optional sparsity prior) and gradient.

    ``theta`` holds (log lengthscales, log signal var, log noise var);
    ``sq_diffs`` is the (D, N, N) tensor of per-dimension squared input
    differences, precomputed once per fit.
    """
    dim, n = sq_diffs.shape[0], x.shape[0]
    ls, signal_var, noise_var = _unpack(theta, dim)
    inv_ls2 = 1.0 / ls**2
    r2 = np.tensordot(inv_ls2, sq_diffs, axes=(0, 0))
    base = base_correlation(kind, r2)
    k_f = signal_var * base
    k = k_f + noise_var * np.eye(n)
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return -np.inf, np.zeros_like(theta)
    alpha = cho_solve((chol, True), y_std)
    mll = (
        -0.5 * float(y_std @ alpha)
        - float(np.sum(np.log(np.diag(chol))))
        - 0.5 * n * np.log(2.0 * np.pi)
    )

    k_inv = cho_solve((chol, True), np.eye(n))
    w = np.outer(alpha, alpha) - k_inv
    grad = np.empty_like(theta)
    dbase = signal_var * base_correlation_grad_r2(kind, r2)
    for d in range(dim):
        dk = dbase * (-2.0 * sq_diffs[d] * inv_ls2[d])
        grad[d] = 0.5 * float(np.sum(w * dk))
    grad[dim] = 0.5 * float(np.sum(w * k_f))
    grad[dim + 1] = 0.5 * noise_var * float(np.trace(w))

    if sparsity_weight > 0.0:
        # half-Cauchy prior on inverse lengthscales: shrinks 1/l toward 0
        rho2 = inv_ls2
        tau2 = sparsity_scale**2
        mll += sparsity_weight * float(np.sum(-np.log1p(rho2 / tau2)))
        grad[:dim] += sparsity_weight * 2.0 * rho2 / (tau2 + rho2)
    return mll, grad


def fit(
    x: np.ndarray,
    y: np.ndarray,
    kind: str = "matern52",
    restarts: int = 2,
    seed: int = 0,
    sparsity_weight: float = 0.0,
    sparsity_scale: float = 0.1,
    warm_start: tuple[Kernel, float] | None = None,
    max_iter: int = 60,
) -> GPModel:
    """Fit hyperparameters by maximizing the (penalized) marginal likelihood.

    Restart starting points are drawn from the candidate generator inside
    the log-bound box; with a warm start the previous optimum is used as
    the first restart. Deterministic given the seed.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise ValidationError("inputs and outputs must have equal length")
    if x.shape[0] < 2:
        raise InsufficientDataError("need at least 2 training points")
    if not np.all(np.isfinite(y)):
        raise ValidationError("outputs must be finite")
    if np.any(x < -1e-9) or np.any(x > 1 + 1e-9):
        raise ValidationError("inputs must be normalized to the unit hypercube")

    n, dim = x.shape
    y_mean = float(y.mean())
    y_std = float(y.std())
    if y_std < 1e-12:
        y_std = 1.0
    y_stdz = (y - y_mean) / y_std

    sq_diffs = (x[:, None, :] - x[None, :, :]) ** 2  # (N, N, D)
    sq_diffs = np.ascontiguousarray(np.moveaxis(sq_diffs, 2, 0))

    lo = np.log(np.array([LENGTHSCALE_BOUNDS[0]] * dim
                         + [SIGNAL_VAR_BOUNDS[0], NOISE_BOUNDS[0]]))
    hi = np.log(np.array([LENGTHSCALE_BOUNDS[1]] * dim
                         + [SIGNAL_VAR_BOUNDS[1], NOISE_BOUNDS[1]]))

    starts = []
    if warm_start is not None:
        kernel0, noise0 = warm_start
        starts.append(np.concatenate([
            np.log(kernel0.lengthscales),
            [np.log(kernel0.signal_var), np.log(noise0)],
        ]))
    center = np.concatenate([
        np.full(dim, np.log(default_lengthscale(dim))),
        [0.0, np.log(np.sqrt(NOISE_BOUNDS[0] * NOISE_BOUNDS[1]))],
    ])
    starts.append(np.clip(center, lo, hi))
    if restarts > len(starts):
        gen = CandidateGenerator(dim + 2, seed=seed)
        extra = gen.take(restarts - len(starts))
        for u in extra:
            starts.append(lo + u * (hi - lo))

    def objective(theta):
        mll, grad = log_marginal_likelihood(
            theta, x, y_stdz, kind, sq_diffs, sparsity_weight, sparsity_scale
        )
        return -mll, -grad

    best_theta, best_val = None, np.inf
    for theta0 in starts:
        res = optimize.minimize(
            objective, theta0, jac=True, method="L-BFGS-B",
            bounds=list(zip(lo, hi)), options={"maxiter": max_iter},
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    if best_theta is None:
        raise NumericalError("marginal likelihood optimization failed at every restart")

    ls, signal_var, noise_var = _unpack(best_theta, dim)
    kernel = Kernel(kind, np.clip(ls, *LENGTHSCALE_BOUNDS), signal_var)
    noise_var = float(np.clip(noise_var, *NOISE_BOUNDS))
    k = kernel_matrix(kernel, x) + noise_var * np.eye(n)
    chol, jitter = cholesky_with_jitter(k)
    alpha = cho_solve((chol, True), y_stdz)
    return GPModel(
        kernel=kernel,
        noise_var=noise_var,
        x_train=x,
        y_mean=y_mean,
        y_std=y_std,
        y_train_std=y_stdz,
        chol=chol,
        alpha=alpha,
        jitter=jitter,
    )

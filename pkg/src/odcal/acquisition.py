"""Acquisition functions and their inner optimization (minimization setting).

log expected improvement uses a scaled-complementary-error-function form
that stays finite arbitrarily deep into the no-improvement regime. Batch
proposals are built sequential-greedily: either with posterior-mean
fantasies (refit-free rank-1 updates) scored by log EI, or with Monte
Carlo q-EI draws that couple each candidate with the pending batch
members through the joint posterior.
"""

from __future__ import annotations

import numpy as np
from scipy import special
from scipy.linalg import solve_triangular

from .gp import GPModel, cholesky_with_jitter
from .kernels import kernel_matrix
from .seeding import derive_seed
from .sobol import CandidateGenerator

LOG_EI_FLOOR = -1e12  # sentinel for log(0): exact-zero improvement at s = 0
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def log_ei(mean, std, best) -> np.ndarray | float:
    """Log expected improvement below ``best`` for a minimization problem.

    EI = s * (z * Phi(z) + phi(z)) with z = (best - mean) / s. For z < 0
    the bracket is evaluated as phi(z) * h(z) with
    h(z) = 1 + z * sqrt(pi/2) * erfcx(-z / sqrt(2)), so the log never
    underflows to -inf however negative z gets. s = 0 degenerates to the
    deterministic limit max(best - mean, 0).
    """
    scalar = np.isscalar(mean) and np.isscalar(std)
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = np.atleast_1d(np.asarray(std, dtype=float))
    mean, std = np.broadcast_arrays(mean, std)
    out = np.empty(mean.shape)

    zero_s = std <= 0.0
    if np.any(zero_s):
        gap = best - mean[zero_s]
        out[zero_s] = np.where(gap > 0, np.log(np.maximum(gap, 1e-300)), LOG_EI_FLOOR)

    pos = ~zero_s
    if np.any(pos):
        s = std[pos]
        z = (best - mean[pos]) / s
        val = np.empty(z.shape)
        hi = z >= 0
        if np.any(hi):
            zz = z[hi]
            val[hi] = np.log(
                zz * special.ndtr(zz) + np.exp(-0.5 * zz * zz) / _SQRT_2PI
            )
        lo = ~hi
        if np.any(lo):
            zz = z[lo]
            h = 1.0 + zz * np.sqrt(np.pi / 2.0) * special.erfcx(-zz / np.sqrt(2.0))
            h = np.maximum(h, 1e-300)
            val[lo] = -0.5 * zz * zz - np.log(_SQRT_2PI) + np.log(h)
        out[pos] = np.log(s) + val
    return float(out[0]) if scalar else out


def pattern_search(objective, starts: np.ndarray, max_iter: int = 40,
                   initial_step: float = 0.1, tol: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Derivative-free compass search maximizing ``objective`` in [0, 1]^D.

    Runs every start in lockstep: each iteration scores the 2D coordinate
    probes of all still-active searches in a single objective call.
    ``objective`` maps an (M, D) batch to M scores. Deterministic.
    Returns (points, scores), one row per start.
    """
    x = np.clip(np.atleast_2d(np.asarray(starts, dtype=float)), 0.0, 1.0)
    n, dim = x.shape
    best = np.asarray(objective(x), dtype=float).copy()
    steps = np.full(n, initial_step)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        # probes: for each active row, +/- step along every coordinate
        probes = np.repeat(x[idx], 2 * dim, axis=0)
        coord = np.tile(np.repeat(np.arange(dim), 2), idx.size)
        sign = np.tile(np.array([1.0, -1.0] * dim), idx.size)
        flat = np.arange(probes.shape[0])
        probes[flat, coord] = np.clip(
            probes[flat, coord] + sign * np.repeat(steps[idx], 2 * dim), 0.0, 1.0
        )
        scores = np.asarray(objective(probes), dtype=float).reshape(idx.size, 2 * dim)
        arg = scores.argmax(axis=1)
        score_best = scores[np.arange(idx.size), arg]
        improved = score_best > best[idx]
        imp_rows = idx[improved]
        if imp_rows.size:
            sel = np.flatnonzero(improved)
            x[imp_rows] = probes.reshape(idx.size, 2 * dim, dim)[sel, arg[sel]]
            best[imp_rows] = score_best[sel]
        stuck = idx[~improved]
        steps[stuck] *= 0.5
        active[stuck] = steps[stuck] >= tol
    return x, best


def _raw_candidates(gen, raw_samples, incumbent):
    raw = gen.take(raw_samples)
    if incumbent is not None:
        raw = np.vstack([raw, np.clip(incumbent, 0.0, 1.0)])
    return raw


def propose_batch_ei(
    model: GPModel,
    batch_size: int,
    num_restarts: int,
    raw_samples: int,
    seed: int,
    incumbent: np.ndarray | None = None,
) -> tuple[np.ndarray, list[str]]:
    """Sequential-greedy log-EI batch with posterior-mean fantasies.

    Returns the proposed unit-cube points and any warning notes (the
    degenerate flat-posterior case falls back to a uniform proposal).
    """
    dim = model.kernel.dimension
    warnings: list[str] = []
    gen = CandidateGenerator(dim, seed=derive_seed(seed, "acq-raw"))
    points = np.empty((batch_size, dim))
    current = model
    for slot in range(batch_size):
        raw = _raw_candidates(gen, raw_samples, incumbent)
        mean, var = current.posterior(raw)
        std = np.sqrt(var)
        if float(std.max(initial=0.0)) < 1e-10:
            warnings.append(f"flat posterior at slot {slot}; uniform fallback")
            rng = np.random.default_rng(derive_seed(seed, "acq-fallback", slot))
            points[slot] = rng.random(dim)
            current = current.fantasize(points[slot][None, :])
            continue
        best = float(current.y_train_std.min())

        def score(batch: np.ndarray) -> np.ndarray:
            m, v = current.posterior(batch)
            return log_ei(m, np.sqrt(v), best)

        order = np.argsort(-log_ei(mean, std, best), kind="stable")
        starts = raw[order[:num_restarts]]
        refined, values = pattern_search(score, starts)
        points[slot] = refined[int(np.argmax(values))]
        current = current.fantasize(points[slot][None, :])
    return points, warnings


class _PendingSampler:
    """Couples candidate scores with pending batch points via the joint
    posterior, without ever forming a candidate-candidate covariance.

    Draws f(pending) once (S joint samples), then samples each candidate
    from its conditional given those pending values; base normals are
    fixed per instance, so scores are smooth in the candidate location.
    """

    def __init__(self, model: GPModel, pending: np.ndarray, best: float,
                 sample_shape: int, seed: int):
        self.model = model
        self.pending = pending
        self.best = best
        rng = np.random.default_rng(seed)
        self.z_cand = rng.standard_normal(sample_shape)
        if len(pending):
            mean_p, cov_p = model.posterior_joint(pending)
            np.fill_diagonal(cov_p, np.maximum(np.diag(cov_p), 0.0))
            if float(np.max(np.diag(cov_p))) < 1e-14:
                self.f_pending = np.tile(mean_p, (sample_shape, 1))
            else:
                chol, _ = cholesky_with_jitter(cov_p)
                z = rng.standard_normal((sample_shape, len(pending)))
                self.f_pending = mean_p + z @ chol.T
            self.pending_min = self.f_pending.min(axis=1)  # (S,)
            # pieces for conditional draws of candidates given f(pending)
            self.mean_p = mean_p
            self.cov_p_chol, _ = cholesky_with_jitter(
                cov_p + 1e-10 * np.eye(len(pending))
            )
            self.v_pending = solve_triangular(
                model.chol,
                kernel_matrix(model.kernel, model.x_train, pending),
                lower=True,
            )

    def scores(self, candidates: np.ndarray) -> np.ndarray:
        model = self.model
        mean_x, var_x = model.posterior(candidates)
        if not len(self.pending):
            draws = mean_x + np.sqrt(var_x) * self.z_cand[:, None]
            return np.maximum(self.best - draws, 0.0).mean(axis=0)
        k_xp = kernel_matrix(model.kernel, candidates, self.pending)
        v_x = solve_triangular(
            model.chol, kernel_matrix(model.kernel, model.x_train, candidates),
            lower=True,
        )
        cov_xp = k_xp - v_x.T @ self.v_pending           # (M, P)
        a = solve_triangular(self.cov_p_chol, cov_xp.T, lower=True)      # (P, M)
        gain = solve_triangular(self.cov_p_chol.T, a, lower=False).T     # (M, P)
        cond_var = np.maximum(var_x - np.sum(gain * cov_xp, axis=1), 0.0)
        shift = (self.f_pending - self.mean_p) @ gain.T                  # (S, M)
        draws = mean_x + shift + np.sqrt(cond_var) * self.z_cand[:, None]
        joint_min = np.minimum(draws, self.pending_min[:, None])
        return np.maximum(self.best - joint_min, 0.0).mean(axis=0)


def propose_batch_mc(
    model: GPModel,
    batch_size: int,
    num_restarts: int,
    raw_samples: int,
    sample_shape: int,
    seed: int,
    incumbent: np.ndarray | None = None,
) -> tuple[np.ndarray, list[str]]:
    """Sequential-greedy batch scored by Monte Carlo q-EI draws."""
    dim = model.kernel.dimension
    warnings: list[str] = []
    gen = CandidateGenerator(dim, seed=derive_seed(seed, "acq-raw"))
    best = float(model.y_train_std.min())
    pending = np.empty((0, dim))
    points = np.empty((batch_size, dim))
    for slot in range(batch_size):
        raw = _raw_candidates(gen, raw_samples, incumbent)
        _, var = model.posterior(raw)
        if float(np.sqrt(var).max(initial=0.0)) < 1e-10:
            warnings.append(f"flat posterior at slot {slot}; uniform fallback")
            rng = np.random.default_rng(derive_seed(seed, "acq-fallback", slot))
            points[slot] = rng.random(dim)
            pending = np.vstack([pending, points[slot][None, :]])
            continue
        sampler = _PendingSampler(model, pending, best, sample_shape,
                                  derive_seed(seed, "acq-mc", slot))
        order = np.argsort(-sampler.scores(raw), kind="stable")
        starts = raw[order[:num_restarts]]
        refined, values = pattern_search(sampler.scores, starts)
        points[slot] = refined[int(np.argmax(values))]
        pending = np.vstack([pending, points[slot][None, :]])
    return points, warnings

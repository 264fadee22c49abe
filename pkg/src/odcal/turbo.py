"""Trust-region state machine and candidate proposal.

The region is an axis-aligned box around the incumbent whose per-side
widths follow the GP lengthscales (normalized by their arithmetic and
then geometric means). The base length doubles after 3 consecutive
successful batches, halves once failures reach ceil(max(4/b, D/b)), and
a restart triggers when it drops below 0.5^7.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .gp import GPModel
from .seeding import derive_seed
from .sobol import CandidateGenerator

LENGTH_INIT = 0.8
LENGTH_MIN = 0.5**7
LENGTH_MAX = 1.6
SUCCESS_THRESHOLD = 3


def failure_tolerance(dim: int, batch_size: int) -> int:
    return math.ceil(max(4.0 / batch_size, dim / batch_size))


@dataclass(frozen=True)
class TrustRegionState:
    dim: int
    batch_size: int
    length: float = LENGTH_INIT
    success_count: int = 0
    failure_count: int = 0
    best_value: float = math.inf
    center: np.ndarray | None = None
    restarts: int = 0
    needs_restart: bool = False

    @property
    def failure_tolerance(self) -> int:
        return failure_tolerance(self.dim, self.batch_size)

    def with_incumbent(self, value: float, point: np.ndarray) -> "TrustRegionState":
        return replace(self, best_value=value, center=np.asarray(point, dtype=float))


def turbo_update(
    state: TrustRegionState,
    batch_values: np.ndarray,
    batch_points: np.ndarray,
) -> TrustRegionState:
    """Pure transition: counts the batch as a success iff it strictly
    improves the region's incumbent; exactly one counter resets."""
    batch_values = np.asarray(batch_values, dtype=float)
    if batch_values.size == 0:
        raise ValueError("batch outcomes must be non-empty")
    best_idx = int(np.argmin(batch_values))
    improved = batch_values[best_idx] < state.best_value

    if improved:
        state = state.with_incumbent(
            float(batch_values[best_idx]), batch_points[best_idx]
        )
        success = state.success_count + 1
        if success >= SUCCESS_THRESHOLD:
            state = replace(
                state,
                length=min(2.0 * state.length, LENGTH_MAX),
                success_count=0,
                failure_count=0,
            )
        else:
            state = replace(state, success_count=success, failure_count=0)
    else:
        failures = state.failure_count + 1
        if failures >= state.failure_tolerance:
            state = replace(
                state, length=state.length / 2.0, success_count=0, failure_count=0
            )
        else:
            state = replace(state, failure_count=failures, success_count=0)

    if state.length < LENGTH_MIN:
        state = replace(state, needs_restart=True)
    return state


def restart_design_size(dim: int) -> int:
    """Fresh design points drawn after a region collapse."""
    return max(2, math.ceil(dim / 5) + 1)


def fresh_state(dim: int, batch_size: int, restarts: int = 0) -> TrustRegionState:
    return TrustRegionState(dim=dim, batch_size=batch_size, restarts=restarts)


def anisotropic_weights(lengthscales: np.ndarray) -> np.ndarray:
    """Side weights: lengthscales over their arithmetic mean, then
    normalized by the geometric mean so the box volume stays length^D."""
    ls = np.asarray(lengthscales, dtype=float)
    w = ls / ls.mean()
    return w / np.exp(np.mean(np.log(w)))


def turbo_propose(
    model: GPModel,
    state: TrustRegionState,
    batch_size: int,
    seed: int,
    n_candidates: int | None = None,
) -> np.ndarray | None:
    """Thompson-sampled batch inside the trust region; None on collapse.

    Candidates start from the low-discrepancy stream inside the box; each
    keeps the center's coordinates except in dimensions chosen by an
    independent mask with probability min(20/D, 1) (at least one
    dimension always perturbed). Selection draws one joint posterior
    sample per batch slot and takes its minimizer.
    """
    dim = state.dim
    center = np.clip(state.center, 0.0, 1.0)
    weights = anisotropic_weights(model.kernel.lengthscales)
    lower = np.clip(center - state.length / 2.0 * weights, 0.0, 1.0)
    upper = np.clip(center + state.length / 2.0 * weights, 0.0, 1.0)
    if np.all(upper - lower < 1e-12):
        return None  # region collapse: caller restarts

    if n_candidates is None:
        n_candidates = min(50 * dim, 1000)
    gen = CandidateGenerator(dim, seed=derive_seed(seed, "tr-candidates"))
    cand = lower + gen.take(n_candidates) * (upper - lower)

    rng = np.random.default_rng(derive_seed(seed, "tr-mask"))
    prob = min(20.0 / dim, 1.0)
    mask = rng.random((n_candidates, dim)) < prob
    empty = ~mask.any(axis=1)
    if np.any(empty):
        forced = rng.integers(0, dim, size=int(empty.sum()))
        mask[np.flatnonzero(empty), forced] = True
    cand = np.where(mask, cand, center)

    draws = model.sample_posterior(
        cand, batch_size, derive_seed(seed, "tr-thompson")
    )
    chosen: list[int] = []
    for row in draws:
        scores = row.copy()
        scores[chosen] = np.inf  # keep batch points distinct
        chosen.append(int(np.argmin(scores)))
    return cand[chosen]

"""The five search methods behind one loop contract.

Every method consumes the same seeded initial design (identical for a
given run seed regardless of method), proposes per-epoch batches, and
tracks the incumbent. Batch methods spend batch_size evaluations per
epoch; SPSA spends its two symmetric evaluations per epoch against the
same budget accounting. Evaluation seeds derive from
(run seed, epoch index, batch index), so parallel batch evaluation is
order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from . import gp, turbo
from .acquisition import propose_batch_ei, propose_batch_mc
from .errors import ConfigurationError, EvaluationError, ValidationError
from .kernels import KERNEL_KINDS
from .seeding import derive_seed, rng_for

METHODS = ("random", "spsa", "vanilla-bo", "saasbo", "turbo")

SPSA_ALPHA = 0.602
SPSA_GAMMA = 0.101
SAAS_PRIOR_SCALE = 0.1


@dataclass(frozen=True)
class EvalOutcome:
    """Objective value (minimized) plus the NRMSE reported in traces."""

    value: float
    nrmse: float


Objective = Callable[[np.ndarray, int], EvalOutcome]


@dataclass(frozen=True)
class OptimizerConfig:
    method: str
    kernel: str = "matern52"
    init_points: int = 10
    epochs: int = 50
    batch_size: int = 2
    num_restarts: int = 8
    raw_samples: int = 128
    sample_shape: int = 64
    seed: int = 0
    mc_batch: bool = False
    gp_restarts: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.kernel not in KERNEL_KINDS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        for name in ("init_points", "epochs", "batch_size", "num_restarts",
                     "raw_samples", "sample_shape", "gp_restarts"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")


@dataclass
class EvaluationLog:
    """Ordered evaluation records; the incumbent is the earliest minimum."""

    dim: int
    points: list = field(default_factory=list)    # unit-cube coordinates
    values: list = field(default_factory=list)
    nrmses: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    seeds: list = field(default_factory=list)

    def add(self, point: np.ndarray, outcome: EvalOutcome, epoch: int, seed: int):
        self.points.append(np.asarray(point, dtype=float))
        self.values.append(outcome.value)
        self.nrmses.append(outcome.nrmse)
        self.epochs.append(epoch)
        self.seeds.append(seed)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def incumbent_index(self) -> int:
        return int(np.argmin(self.values))  # argmin keeps the earliest tie

    @property
    def incumbent_value(self) -> float:
        return self.values[self.incumbent_index]

    @property
    def incumbent_nrmse(self) -> float:
        return self.nrmses[self.incumbent_index]

    @property
    def incumbent_point(self) -> np.ndarray:
        return self.points[self.incumbent_index]

    def points_array(self) -> np.ndarray:
        return np.array(self.points)

    def values_array(self) -> np.ndarray:
        return np.array(self.values)


@dataclass
class RunResult:
    method: str
    config: OptimizerConfig
    log: EvaluationLog
    trace: list[float]                # incumbent NRMSE after init and each epoch
    epoch_records: list[dict]
    error: str | None = None

    @property
    def best_nrmse(self) -> float:
        return self.log.incumbent_nrmse

    @property
    def init_min_nrmse(self) -> float:
        init = [n for n, e in zip(self.log.nrmses, self.log.epochs) if e == 0]
        return min(init)


# ---------------------------------------------------------------------------
# Initial design

def unit_design(dim: int, n: int, seed: int) -> np.ndarray:
    """Uniform points in [0,1]^D; depends only on (seed, dim, n), so the
    pool is shared across methods for a given run seed."""
    return rng_for(seed, "init-design", dim, n).random((n, dim))


def initial_design(dim: int, n: int, bounds: tuple[np.ndarray, np.ndarray],
                   seed: int) -> np.ndarray:
    if n < 1:
        raise ValidationError("need at least one design point")
    lower, upper = bounds
    return lower + unit_design(dim, n, seed) * (upper - lower)


# ---------------------------------------------------------------------------
# SPSA

@dataclass(frozen=True)
class SpsaState:
    point: np.ndarray            # current iterate in [0,1]^D
    k: int
    a: float
    c: float
    big_a: int
    alpha: float = SPSA_ALPHA
    gamma: float = SPSA_GAMMA

    @property
    def a_k(self) -> float:
        return self.a / (self.k + 1 + self.big_a) ** self.alpha

    @property
    def c_k(self) -> float:
        return self.c / (self.k + 1) ** self.gamma


def spsa_constants(epochs: int, c: float = 0.1) -> tuple[int, float]:
    """Stability offset A = ceil(0.10 T) and step scale
    a = round(0.1 (1 + A)^alpha, 2)."""
    big_a = math.ceil(0.10 * epochs)
    a = round(0.1 * (1 + big_a) ** SPSA_ALPHA, 2)
    return big_a, a


def spsa_init(epochs: int, start_point: np.ndarray) -> SpsaState:
    big_a, a = spsa_constants(epochs)
    return SpsaState(point=np.asarray(start_point, dtype=float),
                     k=0, a=a, c=0.1, big_a=big_a)


def spsa_step(
    state: SpsaState,
    evaluate: Callable[[np.ndarray, int], float],
    delta_rng: np.random.Generator,
) -> tuple[SpsaState, np.ndarray, np.ndarray]:
    """One iteration: symmetric perturbation, gradient estimate, clipped step.

    ``evaluate(point, index)`` runs the objective (index 0 for +, 1 for -);
    returns (new state, the two evaluated points).
    """
    dim = state.point.shape[0]
    delta = delta_rng.integers(0, 2, size=dim) * 2.0 - 1.0
    c_k = state.c_k
    plus = np.clip(state.point + c_k * delta, 0.0, 1.0)
    minus = np.clip(state.point - c_k * delta, 0.0, 1.0)
    f_plus = evaluate(plus, 0)
    f_minus = evaluate(minus, 1)
    grad = (f_plus - f_minus) / (2.0 * c_k) * delta
    new_point = np.clip(state.point - state.a_k * grad, 0.0, 1.0)
    return replace(state, point=new_point, k=state.k + 1), plus, minus


# ---------------------------------------------------------------------------
# Run loop

def _scale(points: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return lower + points * (upper - lower)


class _Evaluator:
    """Maps unit-cube points to the oracle's demand space and logs results."""

    def __init__(self, oracle: Objective, lower, upper, log: EvaluationLog,
                 run_seed: int):
        self.oracle = oracle
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.log = log
        self.run_seed = run_seed

    def __call__(self, point: np.ndarray, epoch: int, index: int) -> EvalOutcome:
        seed = derive_seed(self.run_seed, epoch, index)
        raw = _scale(np.clip(point, 0.0, 1.0), self.lower, self.upper)
        try:
            outcome = self.oracle(raw, seed)
        except Exception as exc:  # oracle failure carries the point
            raise EvaluationError(f"objective failed at {raw!r}: {exc}",
                                  point=raw) from exc
        if not np.isfinite(outcome.value):
            raise EvaluationError(f"objective returned non-finite value at {raw!r}",
                                  point=raw)
        self.log.add(point, outcome, epoch, seed)
        return outcome


def run(
    method: str,
    oracle: Objective,
    dim: int,
    bounds: tuple[np.ndarray, np.ndarray],
    config: OptimizerConfig,
) -> RunResult:
    """Execute the initial design plus ``epochs`` batches of one method.

    Total evaluations: init + T*b for batch methods, init + 2T for SPSA.
    An oracle failure aborts the run and preserves the partial log.
    """
    if method != config.method:
        config = replace(config, method=method)
    lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    log = EvaluationLog(dim=dim)
    evaluate = _Evaluator(oracle, lower, upper, log, config.seed)
    trace: list[float] = []
    records: list[dict] = []

    # single-threaded BLAS: the loop is dominated by small factorizations
    # where thread handoff costs far more than it saves
    with threadpool_limits(limits=1):
        try:
            design = unit_design(dim, config.init_points, config.seed)
            for i, point in enumerate(design):
                evaluate(point, 0, i)
            trace.append(log.incumbent_nrmse)
            _loop(method, evaluate, log, trace, records, dim, config)
            error = None
        except EvaluationError as exc:
            error = str(exc)
    return RunResult(method=method, config=config, log=log, trace=trace,
                     epoch_records=records, error=error)


def _fit_surrogate(points, values, config, epoch, warm, sparsity=0.0):
    warm_start = None
    if warm is not None:
        warm_start = (warm.kernel, warm.noise_var)
    return gp.fit(
        points, values, kind=config.kernel, restarts=config.gp_restarts,
        seed=derive_seed(config.seed, "gp-fit", epoch),
        sparsity_weight=sparsity, sparsity_scale=SAAS_PRIOR_SCALE,
        warm_start=warm_start,
    )


def _record(records, epoch, proposed, model=None, tr_length=None, warnings=()):
    rec = {"epoch": epoch, "proposed": np.asarray(proposed).tolist()}
    if model is not None:
        rec["lengthscales"] = model.kernel.lengthscales.tolist()
        rec["signal_var"] = model.kernel.signal_var
        rec["noise_var"] = model.noise_var
    if tr_length is not None:
        rec["tr_length"] = tr_length
    if warnings:
        rec["warnings"] = list(warnings)
    records.append(rec)


def _loop(method, evaluate, log, trace, records, dim, config):
    if method == "random":
        _run_random(evaluate, log, trace, records, dim, config)
    elif method == "spsa":
        _run_spsa(evaluate, log, trace, records, dim, config)
    elif method in ("vanilla-bo", "saasbo"):
        _run_bo(method, evaluate, log, trace, records, dim, config)
    elif method == "turbo":
        _run_turbo(evaluate, log, trace, records, dim, config)
    else:
        raise ConfigurationError(f"unknown method {method!r}")


def _run_random(evaluate, log, trace, records, dim, config):
    for epoch in range(1, config.epochs + 1):
        rng = rng_for(config.seed, "random-proposals", epoch)
        batch = rng.random((config.batch_size, dim))
        for j, point in enumerate(batch):
            evaluate(point, epoch, j)
        trace.append(log.incumbent_nrmse)
        _record(records, epoch, batch)


def _run_spsa(evaluate, log, trace, records, dim, config):
    state = spsa_init(config.epochs, log.incumbent_point)
    delta_rng = rng_for(config.seed, "spsa-delta")  # independent of eval seeds
    for epoch in range(1, config.epochs + 1):
        def spsa_eval(point, index, _epoch=epoch):
            return evaluate(point, _epoch, index).value

        state, plus, minus = spsa_step(state, spsa_eval, delta_rng)
        trace.append(log.incumbent_nrmse)
        _record(records, epoch, [plus, minus])


def _run_bo(method, evaluate, log, trace, records, dim, config):
    sparsity = 1.0 if method == "saasbo" else 0.0
    use_mc = method == "saasbo" or config.mc_batch
    model = None
    for epoch in range(1, config.epochs + 1):
        model = _fit_surrogate(log.points_array(), log.values_array(), config,
                               epoch, model, sparsity)
        acq_seed = derive_seed(config.seed, method, epoch)
        if use_mc:
            batch, warns = propose_batch_mc(
                model, config.batch_size, config.num_restarts,
                config.raw_samples, config.sample_shape, acq_seed,
                incumbent=log.incumbent_point,
            )
        else:
            batch, warns = propose_batch_ei(
                model, config.batch_size, config.num_restarts,
                config.raw_samples, acq_seed, incumbent=log.incumbent_point,
            )
        for j, point in enumerate(batch):
            evaluate(point, epoch, j)
        trace.append(log.incumbent_nrmse)
        _record(records, epoch, batch, model=model, warnings=warns)


def _consume_pending(pending, config, epoch, dim):
    """Pop up to one batch from the restart queue, padded with seeded
    uniform points so every epoch spends exactly batch_size evaluations."""
    batch = [pending.pop(0) for _ in range(min(config.batch_size, len(pending)))]
    while len(batch) < config.batch_size:
        rng = rng_for(config.seed, "turbo-pad", epoch, len(batch))
        batch.append(rng.random(dim))
    return np.array(batch)


def _run_turbo(evaluate, log, trace, records, dim, config):
    state = turbo.fresh_state(dim, config.batch_size)
    state = state.with_incumbent(log.incumbent_value, log.incumbent_point)
    region_start = 0          # log index where the current region's data begins
    pending: list[np.ndarray] = []  # restart design awaiting evaluation
    model = None

    def evaluate_design_batch(epoch):
        nonlocal state
        batch = _consume_pending(pending, config, epoch, dim)
        values = np.array([evaluate(p, epoch, j).value
                           for j, p in enumerate(batch)])
        best = int(np.argmin(values))
        if values[best] < state.best_value:
            state = state.with_incumbent(values[best], batch[best])
        trace.append(log.incumbent_nrmse)
        _record(records, epoch, batch, tr_length=state.length)

    def restart():
        nonlocal state, region_start, model
        state = turbo.fresh_state(dim, config.batch_size,
                                  restarts=state.restarts + 1)
        region_start = len(log)
        model = None
        rng = rng_for(config.seed, "turbo-restart", state.restarts)
        pending.extend(rng.random((turbo.restart_design_size(dim), dim)))

    for epoch in range(1, config.epochs + 1):
        if pending:
            evaluate_design_batch(epoch)
            continue

        region_points = log.points_array()[region_start:]
        region_values = log.values_array()[region_start:]
        model = _fit_surrogate(region_points, region_values, config, epoch,
                               model, 0.0)
        batch = turbo.turbo_propose(
            model, state, config.batch_size,
            derive_seed(config.seed, "turbo", epoch),
        )
        if batch is None:  # region collapse: restart and spend the epoch
            restart()
            evaluate_design_batch(epoch)
            continue
        values = np.array([evaluate(p, epoch, j).value
                           for j, p in enumerate(batch)])
        state = turbo.turbo_update(state, values, batch)
        trace.append(log.incumbent_nrmse)
        _record(records, epoch, batch, model=model, tr_length=state.length)
        if state.needs_restart:
            restart()

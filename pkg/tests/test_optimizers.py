import numpy as np
import pytest

from odcal.errors import ConfigurationError
from odcal.optimizers import (
    METHODS,
    EvalOutcome,
    EvaluationLog,
    OptimizerConfig,
    initial_design,
    run,
    unit_design,
)

HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN_A = np.array([
    [10, 3, 17, 3.5, 1.7, 8],
    [0.05, 10, 17, 0.1, 8, 14],
    [3, 3.5, 1.7, 10, 17, 8],
    [17, 8, 0.05, 10, 0.1, 14],
])
HARTMANN_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])


def hartmann6(x):
    inner = np.sum(HARTMANN_A * (x - HARTMANN_P) ** 2, axis=1)
    return -float(np.sum(HARTMANN_ALPHA * np.exp(-inner)))


def as_oracle(fn):
    def oracle(x, seed):
        v = fn(x)
        return EvalOutcome(v, max(v + 4.0, 1e-9))  # shifted positive for traces
    return oracle


def sphere_oracle(x, seed):
    v = float(np.sum((x - 0.4) ** 2))
    return EvalOutcome(v, v + 1e-9)


def small_config(method, **kwargs):
    defaults = dict(init_points=6, epochs=8, batch_size=2, num_restarts=4,
                    raw_samples=32, sample_shape=16, seed=5)
    defaults.update(kwargs)
    return OptimizerConfig(method=method, **defaults)


class TestInitialDesign:
    def test_identical_pools_across_methods(self):
        bounds = (np.zeros(4), np.full(4, 10.0))
        a = initial_design(4, 12, bounds, seed=3)
        b = initial_design(4, 12, bounds, seed=3)
        assert np.array_equal(a, b)  # only (seed, D, n) matter

    def test_points_within_bounds(self):
        lower, upper = np.array([1.0, 5.0]), np.array([2.0, 6.0])
        pts = initial_design(2, 50, (lower, upper), seed=0)
        assert np.all(pts >= lower) and np.all(pts <= upper)

    def test_uniform_moments(self):
        pts = unit_design(3, 10_000, seed=7)
        assert np.all(np.abs(pts.mean(axis=0) - 0.5) <= 0.015)


class TestEvaluationLog:
    def test_incumbent_ties_break_earliest(self):
        log = EvaluationLog(dim=1)
        for i, value in enumerate([3.0, 1.0, 1.0, 2.0]):
            log.add(np.array([0.1 * i]), EvalOutcome(value, value), 0, i)
        assert log.incumbent_index == 1


class TestRunContract:
    @pytest.mark.parametrize("method", METHODS)
    def test_budget_accounting(self, method):
        cfg = small_config(method)
        res = run(method, sphere_oracle, 3, (np.zeros(3), np.ones(3)), cfg)
        expected = 6 + (2 * 8 if method == "spsa" else 8 * 2)
        assert len(res.log) == expected
        assert len(res.trace) == 8 + 1  # init row plus one per epoch

    @pytest.mark.parametrize("method", METHODS)
    def test_incumbent_trace_monotone_non_increasing(self, method):
        cfg = small_config(method)
        res = run(method, sphere_oracle, 3, (np.zeros(3), np.ones(3)), cfg)
        trace = np.array(res.trace)
        assert np.all(np.diff(trace) <= 1e-15)

    @pytest.mark.parametrize("method", METHODS)
    def test_same_seed_identical_traces(self, method):
        cfg = small_config(method)
        bounds = (np.zeros(3), np.ones(3))
        a = run(method, sphere_oracle, 3, bounds, cfg)
        b = run(method, sphere_oracle, 3, bounds, cfg)
        assert a.trace == b.trace
        assert np.array_equal(a.log.points_array(), b.log.points_array())

    @pytest.mark.parametrize("method", METHODS)
    def test_all_points_respect_bounds_under_random_configs(self, method):
        rng = np.random.default_rng(hash(method) % 2**32)
        for trial in range(3):
            cfg = OptimizerConfig(
                method=method,
                init_points=int(rng.integers(2, 8)),
                epochs=int(rng.integers(2, 6)),
                batch_size=int(rng.integers(1, 4)),
                num_restarts=int(rng.integers(1, 6)),
                raw_samples=int(rng.integers(8, 64)),
                sample_shape=int(rng.integers(8, 32)),
                seed=int(rng.integers(0, 10_000)),
            )
            dim = int(rng.integers(1, 5))
            res = run(method, sphere_oracle, dim,
                      (np.zeros(dim), np.ones(dim)), cfg)
            pts = res.log.points_array()
            assert np.all(pts >= 0.0) and np.all(pts <= 1.0)

    def test_shared_initial_design_across_methods(self):
        bounds = (np.zeros(3), np.ones(3))
        runs = {
            m: run(m, sphere_oracle, 3, bounds, small_config(m))
            for m in ("random", "spsa", "vanilla-bo")
        }
        pools = [r.log.points_array()[:6] for r in runs.values()]
        for pool in pools[1:]:
            assert np.array_equal(pool, pools[0])

    def test_oracle_failure_preserves_partial_log(self):
        calls = {"n": 0}

        def flaky(x, seed):
            calls["n"] += 1
            if calls["n"] > 8:
                raise RuntimeError("simulator crashed")
            return EvalOutcome(1.0, 1.0)

        res = run("random", flaky, 2, (np.zeros(2), np.ones(2)),
                  small_config("random"))
        assert res.error is not None
        assert len(res.log) == 8

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigurationError):
            OptimizerConfig(method="annealing")

    def test_epoch_records_carry_hyperparameters(self):
        cfg = small_config("vanilla-bo")
        res = run("vanilla-bo", sphere_oracle, 2, (np.zeros(2), np.ones(2)), cfg)
        rec = res.epoch_records[0]
        assert "lengthscales" in rec and "noise_var" in rec
        cfg = small_config("turbo")
        res = run("turbo", sphere_oracle, 2, (np.zeros(2), np.ones(2)), cfg)
        assert any("tr_length" in r for r in res.epoch_records)


class TestTurboRestartBudget:
    def test_restarts_consume_the_same_epoch_budget(self):
        # a hostile oracle forces repeated failures and region collapse
        def hostile(x, seed):
            return EvalOutcome(1.0 + float(np.sum(x)), 1.0)

        cfg = small_config("turbo", epochs=60, batch_size=2, seed=2)
        res = run("turbo", hostile, 2, (np.zeros(2), np.ones(2)), cfg)
        assert len(res.log) == 6 + 60 * 2  # exact despite any restarts


class TestMethodOrdering:
    def test_vanilla_bo_beats_random_on_hartmann6(self):
        # corridor-style budget on the 6-d Hartmann surface
        oracle = as_oracle(hartmann6)
        bounds = (np.zeros(6), np.ones(6))
        finals = {"vanilla-bo": [], "random": []}
        for seed in range(10):
            for method in finals:
                cfg = OptimizerConfig(
                    method=method, init_points=20, epochs=100, batch_size=3,
                    num_restarts=16, raw_samples=256, sample_shape=64, seed=seed,
                )
                res = run(method, oracle, 6, bounds, cfg)
                finals[method].append(res.log.incumbent_value)
        assert np.mean(finals["vanilla-bo"]) < np.mean(finals["random"])

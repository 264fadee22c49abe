import numpy as np
import pytest

from odcal.errors import ValidationError
from odcal.sensitivity import classify_variables


def quadratic_first_dim(x, seed):
    return float(x[0] ** 2)


class TestClassifier:
    def test_single_active_dimension_dominates(self):
        bounds = (np.full(5, -1.0), np.full(5, 1.0))
        rep = classify_variables(quadratic_first_dim, bounds, probes=5)
        assert rep.classes[0] == "dominant"
        assert all(c == "negligible" for c in rep.classes[1:])

    def test_constant_oracle_all_negligible_with_warning(self):
        bounds = (np.zeros(3), np.ones(3))
        with pytest.warns(UserWarning):
            rep = classify_variables(lambda x, s: 1.0, bounds, probes=3)
        assert rep.count("dominant") == 0
        assert rep.count("secondary") == 0

    @pytest.mark.parametrize("k", [1, 5, 20])
    def test_exactly_k_dominant_dimensions(self, k):
        dim = 20

        def objective(x, seed):
            return float(np.sum(x[:k] ** 2))

        bounds = (np.full(dim, -1.0), np.full(dim, 1.0))
        rep = classify_variables(objective, bounds, probes=7)
        assert rep.count("dominant") == k

    def test_secondary_band(self):
        def objective(x, seed):
            return float(x[0] ** 2 + 0.05 * x[1] ** 2 + 1e-6 * x[2] ** 2)

        bounds = (np.full(3, -1.0), np.full(3, 1.0))
        rep = classify_variables(objective, bounds, probes=5)
        assert rep.classes == ("dominant", "secondary", "negligible")

    def test_requires_three_probes(self):
        with pytest.raises(ValidationError):
            classify_variables(quadratic_first_dim,
                               (np.zeros(2), np.ones(2)), probes=2)

    def test_common_random_numbers_across_dims(self):
        seen = {}

        def recording(x, seed):
            d = int(np.flatnonzero(x != 0.5)[0]) if np.any(x != 0.5) else -1
            seen.setdefault(d, []).append(seed)
            return float(np.sum(x))

        classify_variables(recording, (np.zeros(2), np.ones(2)), probes=3)
        dims = [d for d in seen if d >= 0]
        assert len(dims) >= 1
        seeds_by_dim = {d: seen[d] for d in dims}
        reference = list(seeds_by_dim.values())[0]
        for series in seeds_by_dim.values():
            assert series == reference

    def test_desk_simple_ramp_all_three_dominant(self, ramp_simulator):
        from odcal.metrics import loss
        from odcal.simulator import generate_ground_truth
        lower, upper = np.full(3, 1.0), np.full(3, 2500.0)
        gt = generate_ground_truth(ramp_simulator, lower, upper, gt_seed=2)

        def oracle(x, seed):
            return loss(gt.counts, ramp_simulator.simulate(x, seed).counts)

        rep = classify_variables(oracle, (lower, upper), probes=5)
        assert rep.classes == ("dominant", "dominant", "dominant")

"""Dominant/secondary variable classification by axis-aligned sensitivity.

Each dimension is swept through the domain center while all other
coordinates stay fixed; the per-dimension effect is the range of
objective values along the sweep. Effects are compared to the largest
one: dimensions above ``theta_dominant`` of it are dominant, above
``theta_secondary`` secondary, the rest negligible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .seeding import derive_seed

CLASSES = ("dominant", "secondary", "negligible")


@dataclass(frozen=True)
class SensitivityReport:
    classes: tuple[str, ...]
    effects: np.ndarray

    def count(self, cls: str) -> int:
        return sum(1 for c in self.classes if c == cls)


def classify_variables(
    oracle,
    bounds: tuple[np.ndarray, np.ndarray],
    probes: int = 5,
    theta_dominant: float = 0.1,
    theta_secondary: float = 0.01,
    seed: int = 0,
) -> SensitivityReport:
    """Classify every dimension as dominant, secondary or negligible.

    ``oracle(x, seed)`` returns the objective value. Probe t of every
    dimension shares one derived seed (common random numbers), so a
    stochastic oracle contributes the same noise realization across
    dimensions.
    """
    if probes < 3:
        raise ValidationError("need at least 3 probes per dimension")
    lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    dim = lower.shape[0]
    center = 0.5 * (lower + upper)
    effects = np.zeros(dim)
    probe_seeds = [derive_seed(seed, "sensitivity-probe", t) for t in range(probes)]
    for d in range(dim):
        sweep = np.linspace(lower[d], upper[d], probes)
        values = []
        for t, coord in enumerate(sweep):
            x = center.copy()
            x[d] = coord
            values.append(float(oracle(x, probe_seeds[t])))
        effects[d] = max(values) - min(values)

    max_effect = float(effects.max())
    if max_effect <= 0.0:
        warnings.warn("constant oracle: all dimensions classified negligible")
        return SensitivityReport(("negligible",) * dim, effects)
    classes = []
    for effect in effects:
        if effect >= theta_dominant * max_effect:
            classes.append("dominant")
        elif effect >= theta_secondary * max_effect:
            classes.append("secondary")
        else:
            classes.append("negligible")
    return SensitivityReport(tuple(classes), effects)

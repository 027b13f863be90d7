"""Safety model: a values-only GP over safety observations and the batch functional zeta."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .gp import VALUES_ONLY, Dataset, OptimizerConfig, fit, predict_marginal

__all__ = ["SafetyModel", "fit_safety", "zeta", "point_zeta", "update_safety"]


@dataclass(frozen=True)
class SafetyModel:
    gp: object
    z_max: float

    def __post_init__(self):
        if not np.isfinite(self.z_max):
            raise ValueError("z_max must be finite")


def fit_safety(inputs, z, z_max, theta_init, opt=None, rng_seed=0):
    data = Dataset(inputs, z)
    return SafetyModel(fit(data, VALUES_ONLY, theta_init, opt, rng_seed), float(z_max))


def point_zeta(s, batch):
    """Per-point probability that the safety value stays below ``z_max``.

    Uses the predictive distribution of a noisy safety observation.
    """
    mu, var = predict_marginal(s.gp, batch, include_noise=True)
    sd = np.sqrt(var)
    out = np.empty_like(mu)
    pos = sd > 0
    out[pos] = norm.cdf((s.z_max - mu[pos]) / sd[pos])
    out[~pos] = np.where(mu[~pos] < s.z_max, 1.0, 0.0)
    return np.clip(out, 0.0, 1.0)


def zeta(s, batch):
    """Batch safety: the smallest per-point safe probability over the batch."""
    return float(np.min(point_zeta(s, batch)))


def update_safety(s, new_inputs, new_z, opt=None, rng_seed=0):
    """Refit on the augmented data, warm-starting from the current hyperparameters."""
    new_z = np.asarray(new_z, dtype=float).reshape(-1)
    if new_z.size == 0:
        return s
    data = s.gp.dataset.append(new_inputs, new_z)
    opt = opt or OptimizerConfig(starts=1)
    return SafetyModel(fit(data, VALUES_ONLY, s.gp.theta, opt, rng_seed), s.z_max)

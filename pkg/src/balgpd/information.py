"""Numerical checks of the information-theoretic and matrix-ordering results.

Each ``check_*`` function evaluates one claimed inequality on concrete data and
reports the two sides, so the claims can be exercised on random instances.
"""

from dataclasses import dataclass

import numpy as np

from .acquisition import Criterion, criterion_value
from .exceptions import EmptyHistory, NotPositiveDefinite
from .gp import VALUES_ONLY, WITH_DERIVATIVES, Dataset, condition, predict_point_block
from .kernel import SEHyperparams, assemble_extended_gram, assemble_gram
from .linalg import cholesky_psd, log_det_from_factor, sym_eigenvalues

__all__ = [
    "IgReport",
    "DecaySeries",
    "information_gain",
    "information_gain_of_covariance",
    "check_proposition1",
    "check_theorem1",
    "check_criterion_dominance",
    "lemma1_constant",
    "check_lemma1",
    "decay_series",
    "running_average_nonincreasing",
    "random_instance",
]

LOWNER_TOL = 1e-8
IG_TOL = 1e-10


@dataclass(frozen=True)
class IgReport:
    ig_values_only: float
    ig_with_derivatives: float
    difference: float

    @property
    def passed(self):
        return self.difference >= -IG_TOL


@dataclass(frozen=True)
class DecaySeries:
    per_round: tuple
    running_average: tuple


def _half_logdet_identity_plus(gram, noise_variance):
    if not noise_variance > 0:
        raise ValueError("information gain needs a positive noise variance")
    m = np.eye(gram.shape[0]) + gram / noise_variance
    return 0.5 * log_det_from_factor(cholesky_psd(m, 0.0))


def information_gain(X, theta, scheme):
    """``0.5 * log det(I + K / noise)`` for the (extended) Gram matrix of ``X``."""
    X = np.asarray(X, dtype=float).reshape(-1, theta.dim)
    gram = assemble_extended_gram(X, theta) if scheme == WITH_DERIVATIVES else assemble_gram(X, theta)
    return _half_logdet_identity_plus(gram, theta.noise_variance)


def information_gain_of_covariance(cov, noise_variance):
    """Information of one noisy batch given its predictive covariance."""
    return _half_logdet_identity_plus(np.asarray(cov, dtype=float), noise_variance)


def check_proposition1(X, theta):
    """Compare information gain with and without gradient observations at the same inputs."""
    ig_v = information_gain(X, theta, VALUES_ONLY)
    ig_d = information_gain(X, theta, WITH_DERIVATIVES)
    return IgReport(ig_v, ig_d, ig_d - ig_v)


def _both_covariances(data, theta, Xtest):
    if data.gradients is None:
        raise ValueError("check needs gradient observations in the dataset")
    plain = condition(data.without_gradients(), VALUES_ONLY, theta)
    deriv = condition(data, WITH_DERIVATIVES, theta)
    return predict_point_block(plain, Xtest)[1], predict_point_block(deriv, Xtest)[1]


def check_theorem1(data, theta, Xtest):
    """Smallest eigenvalue of (values-only covariance - derivative point covariance).

    Returns ``(min_eig, passed)`` with ``passed`` when ``min_eig >= -1e-8``.
    """
    cov, cov_d = _both_covariances(data, theta, Xtest)
    lam = float(sym_eigenvalues(cov - cov_d)[-1])
    return lam, lam >= -LOWNER_TOL


def check_criterion_dominance(data, theta, Xtest, tol=LOWNER_TOL):
    """For each criterion, the pair (values-only value, derivative value) and whether it is ordered."""
    cov, cov_d = _both_covariances(data, theta, Xtest)
    out = {}
    for c in Criterion:
        try:
            plain = criterion_value(cov, c)
        except NotPositiveDefinite:
            plain = -np.inf
        try:
            deriv = criterion_value(cov_d, c)
        except NotPositiveDefinite:
            deriv = -np.inf
        out[c] = (plain, deriv, bool(deriv <= plain + tol or deriv == -np.inf))
    return out


def lemma1_constant(theta, n):
    """``2 s2 (1 + n sf2 / s2)`` for noise ``s2`` and signal variance ``sf2``."""
    s2 = theta.noise_variance
    return 2.0 * s2 * (1.0 + n * theta.signal_variance / s2)


def check_lemma1(history, theta, n, ig_realized=None):
    """Average trace of past predictive covariances against the information bound.

    ``history`` holds, per round, the values-only predictive covariance of the
    batch chosen in that round (before observing it). When ``ig_realized`` is
    omitted it is accumulated from the history itself.

    Returns ``(lhs, rhs, passed)``.
    """
    if len(history) == 0:
        raise EmptyHistory("no rounds recorded")
    t = len(history)
    lhs = float(np.mean([np.trace(np.asarray(c, dtype=float)) for c in history]))
    if ig_realized is None:
        ig_realized = sum(information_gain_of_covariance(c, theta.noise_variance) for c in history)
    rhs = lemma1_constant(theta, n) * ig_realized / t
    return lhs, rhs, lhs <= rhs + LOWNER_TOL


def decay_series(per_round):
    values = [float(v) for v in per_round]
    if not values:
        raise EmptyHistory("empty series")
    avg = np.cumsum(values) / np.arange(1, len(values) + 1)
    return DecaySeries(tuple(values), tuple(float(a) for a in avg))


def running_average_nonincreasing(series, start_round=3, tol=1e-12):
    """Whether the running average never rises from ``start_round`` (1-based) to the end."""
    avg = np.asarray(series.running_average)[start_round - 1 :]
    return bool(np.all(np.diff(avg) <= tol * np.maximum(1.0, np.abs(avg[:-1]))))


def random_instance(rng, max_train=6, max_test=4, max_dim=3, noise_range=(1e-3, 1.0)):
    """A random dataset with gradients, hyperparameters with ``sf2 <= 1`` and a test batch."""
    d = int(rng.integers(1, max_dim + 1))
    n0 = int(rng.integers(1, max_train + 1))
    n = int(rng.integers(1, max_test + 1))
    theta = SEHyperparams(
        rng.uniform(0.1, 1.0),
        tuple(rng.uniform(0.3, 2.0, d)),
        float(np.exp(rng.uniform(np.log(noise_range[0]), np.log(noise_range[1])))),
    )
    X = rng.uniform(-2, 2, (n0, d))
    data = Dataset(X, rng.normal(size=n0), rng.normal(size=(n0, d)))
    return data, theta, rng.uniform(-2, 2, (n, d))

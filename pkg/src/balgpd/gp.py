"""Gaussian process regression on values only, or on values plus gradients.

Both schemes share one code path; the only difference is whether the training
(and optionally test) representation is extended with gradient rows. Derivative
observations carry the same noise variance as value observations.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .exceptions import DegenerateData, DimensionMismatch, NotPositiveDefinite
from .kernel import PairwiseDifferences, SEHyperparams, covariance_from_differences, cross_covariance
from .linalg import CholFactor, cholesky_psd, log_det_from_factor

__all__ = [
    "WITH_DERIVATIVES",
    "VALUES_ONLY",
    "Dataset",
    "OptimizerConfig",
    "GpModel",
    "PredictiveBatch",
    "condition",
    "fit",
    "log_marginal_likelihood",
    "lml_gradient",
    "hyperparameter_bounds",
    "predict",
    "predict_point_block",
    "predict_marginal",
    "predict_mean",
]

WITH_DERIVATIVES = "with-derivatives"
VALUES_ONLY = "values-only"
SCHEMES = (WITH_DERIVATIVES, VALUES_ONLY)

GRAM_JITTER = 1e-10
_LOG_2PI = np.log(2.0 * np.pi)
_FAILED = 1e25


def _check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return scheme


@dataclass(frozen=True)
class Dataset:
    """Training inputs ``(n, d)``, outputs ``(n,)`` and optional gradients ``(n, d)``."""

    inputs: np.ndarray
    outputs: np.ndarray
    gradients: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} inputs but {y.shape[0]} outputs")
        G = self.gradients
        if G is not None:
            G = np.asarray(G, dtype=float).reshape(X.shape[0], -1)
            if G.shape != X.shape:
                raise DimensionMismatch(f"gradients of shape {G.shape} for inputs {X.shape}")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)
        object.__setattr__(self, "gradients", G)

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def targets(self, scheme):
        """Observation vector stacked as ``[y_1..y_n, grad y_1, .., grad y_n]``."""
        if _check_scheme(scheme) == VALUES_ONLY:
            return self.outputs
        if self.gradients is None:
            raise DegenerateData("the with-derivatives scheme needs gradient observations")
        return np.concatenate([self.outputs, self.gradients.reshape(-1)])

    def append(self, inputs, outputs, gradients=None):
        inputs = np.asarray(inputs, dtype=float).reshape(-1, self.dim)
        outputs = np.asarray(outputs, dtype=float).reshape(-1)
        if self.gradients is None:
            G = None
        else:
            if gradients is None:
                raise DimensionMismatch("dataset carries gradients; new rows must too")
            G = np.vstack([self.gradients, np.asarray(gradients, dtype=float).reshape(-1, self.dim)])
        return Dataset(np.vstack([self.inputs, inputs]), np.concatenate([self.outputs, outputs]), G)

    def without_gradients(self):
        return Dataset(self.inputs, self.outputs, None)


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for marginal-likelihood maximization.

    ``fixed`` names hyperparameters held at their initial value: any of
    ``"signal_variance"``, ``"lengthscales"``, ``"noise_variance"``.
    """

    starts: int = 5
    max_iter: int = 200
    tol: float = 1e-6
    fd_step: float = 1e-4
    perturbation: float = 1.0
    fixed: tuple = ()
    min_noise_variance: float = 1e-8


@dataclass(frozen=True)
class GpModel:
    dataset: Dataset
    theta: SEHyperparams
    scheme: str
    factor: CholFactor
    alpha: np.ndarray
    lml: float = field(default=float("nan"))

    @property
    def extended(self):
        return self.scheme == WITH_DERIVATIVES

    def predict(self, Xtest):
        return predict(self, Xtest)

    def predict_point_block(self, Xtest):
        return predict_point_block(self, Xtest)


@dataclass(frozen=True)
class PredictiveBatch:
    """Predictive blocks for a test batch of ``n`` points in ``d`` dimensions.

    ``cov_cross`` is the points-by-gradients block; its transpose is the
    gradients-by-points block. Gradient blocks are empty for the values-only
    scheme.
    """

    mean_points: np.ndarray
    mean_grads: np.ndarray
    cov_points: np.ndarray
    cov_cross: np.ndarray
    cov_grads: np.ndarray

    @property
    def cov_gp(self):
        return self.cov_cross.T

    def full_cov(self):
        return np.block([[self.cov_points, self.cov_cross], [self.cov_cross.T, self.cov_grads]])


def _noisy_gram(data, scheme, theta, diff=None):
    ext = scheme == WITH_DERIVATIVES
    if diff is None:
        diff = PairwiseDifferences(data.inputs, data.inputs)
    K = covariance_from_differences(diff, theta, a_grad=ext, b_grad=ext)
    K[np.diag_indices_from(K)] += theta.noise_variance
    return K


def _validate(data, scheme, theta):
    _check_scheme(scheme)
    if data.n == 0:
        raise DegenerateData("no training observations")
    if theta.dim != data.dim:
        raise DimensionMismatch(f"hyperparameters have dimension {theta.dim}, data {data.dim}")


def condition(data, scheme, theta, lml=None):
    """Condition the GP on ``data`` at fixed hyperparameters."""
    _validate(data, scheme, theta)
    y = data.targets(scheme)
    factor = cholesky_psd(_noisy_gram(data, scheme, theta), GRAM_JITTER)
    alpha = sla.cho_solve((factor.lower, True), y, check_finite=False)
    if lml is None:
        lml = _lml_from(factor, alpha, y)
    return GpModel(data, theta, scheme, factor, alpha, float(lml))


def _lml_from(factor, alpha, y):
    return float(-0.5 * y @ alpha - 0.5 * log_det_from_factor(factor) - 0.5 * y.shape[0] * _LOG_2PI)


def log_marginal_likelihood(data, scheme, theta, diff=None):
    """Log density of the stacked observations under the GP prior.

    ``diff`` optionally supplies cached pairwise differences of the inputs.
    """
    _validate(data, scheme, theta)
    y = data.targets(scheme)
    factor = cholesky_psd(_noisy_gram(data, scheme, theta, diff), GRAM_JITTER)
    alpha = sla.cho_solve((factor.lower, True), y, check_finite=False)
    return _lml_from(factor, alpha, y)


def hyperparameter_bounds(data, scheme, opt=None):
    """Box bounds on ``[log sf2, log l_1..l_d, log sn2]``."""
    opt = opt or OptimizerConfig()
    y = data.targets(scheme)
    scale = max(float(np.mean(y**2)), 1e-12)
    ranges = np.ptp(data.inputs, axis=0) if data.n > 1 else np.ones(data.dim)
    ranges = np.where(ranges > 0, ranges, 1.0)
    lo = np.concatenate([[np.log(scale) - 14.0], np.log(ranges) - 5.0, [np.log(opt.min_noise_variance)]])
    hi = np.concatenate([[np.log(scale) + 14.0], np.log(ranges) + 5.0, [np.log(scale) + 5.0]])
    return lo, np.maximum(hi, lo + 1.0)


def _free_mask(dim, fixed):
    mask = np.ones(dim + 2, dtype=bool)
    if "signal_variance" in fixed:
        mask[0] = False
    if "lengthscales" in fixed:
        mask[1:-1] = False
    if "noise_variance" in fixed:
        mask[-1] = False
    return mask


def _lml_log(data, scheme, v, diff=None):
    try:
        return log_marginal_likelihood(data, scheme, SEHyperparams.from_log(v), diff)
    except (NotPositiveDefinite, ValueError, FloatingPointError):
        return -np.inf


def lml_gradient(data, scheme, log_theta, step=1e-4, mask=None, diff=None):
    """Central finite-difference gradient of the log marginal likelihood in log-space."""
    v = np.asarray(log_theta, dtype=float)
    if diff is None:
        diff = PairwiseDifferences(data.inputs, data.inputs)
    mask = np.ones_like(v, dtype=bool) if mask is None else mask
    g = np.zeros_like(v)
    for k in np.flatnonzero(mask):
        e = np.zeros_like(v)
        e[k] = step
        g[k] = (_lml_log(data, scheme, v + e, diff) - _lml_log(data, scheme, v - e, diff)) / (2 * step)
    return g


def fit(data, scheme, theta_init, opt=None, rng_seed=0):
    """Maximize the log marginal likelihood over log-hyperparameters.

    Runs ``opt.starts`` bounded quasi-Newton ascents driven by central
    finite-difference gradients; the first start is ``theta_init`` and the rest
    are Gaussian perturbations of it in log-space. The best hyperparameters
    ever evaluated are returned, so the result never scores below
    ``theta_init``.
    """
    opt = opt or OptimizerConfig()
    _validate(data, scheme, theta_init)
    rng = np.random.default_rng(rng_seed)
    lo, hi = hyperparameter_bounds(data, scheme, opt)
    mask = _free_mask(data.dim, opt.fixed)
    v0 = theta_init.to_log()
    lo = np.where(mask, lo, v0)
    hi = np.where(mask, hi, v0)

    diff = PairwiseDifferences(data.inputs, data.inputs)
    best = {"lml": _lml_log(data, scheme, v0, diff), "v": v0.copy()}

    def record(v, val):
        if val > best["lml"]:
            best["lml"], best["v"] = val, v.copy()

    def objective(u):
        v = v0.copy()
        v[mask] = u
        val = _lml_log(data, scheme, v, diff)
        if not np.isfinite(val):
            return _FAILED, np.zeros_like(u)
        record(v, val)
        g = lml_gradient(data, scheme, v, opt.fd_step, mask, diff)[mask]
        if not np.all(np.isfinite(g)):
            g = np.nan_to_num(g, nan=0.0, posinf=0.0, neginf=0.0)
        return -val, -g

    starts = [np.clip(v0, lo, hi)]
    for _ in range(max(opt.starts, 1) - 1):
        starts.append(np.clip(v0 + opt.perturbation * rng.standard_normal(v0.shape), lo, hi))

    if mask.any():
        bounds = list(zip(lo[mask], hi[mask]))
        for s in starts:
            minimize(
                objective,
                s[mask],
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": opt.max_iter, "ftol": opt.tol * 1e-2, "gtol": 1e-6},
            )

    if not np.isfinite(best["lml"]):
        raise NotPositiveDefinite("the Gram matrix could not be factored at any evaluated hyperparameters")
    theta = theta_init if np.array_equal(best["v"], v0) else SEHyperparams.from_log(best["v"])
    return condition(data, scheme, theta, lml=best["lml"])


def _check_test(model, Xtest):
    X = np.asarray(Xtest, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, model.dataset.dim)
    if X.ndim != 2 or X.shape[1] != model.dataset.dim or X.shape[0] < 1:
        raise DimensionMismatch(f"test inputs of shape {X.shape} for dimension {model.dataset.dim}")
    return X


def _clip_variances(cov, n):
    idx = np.arange(n)
    cov[idx, idx] = np.maximum(cov[idx, idx], 0.0)
    return cov


def predict(model, Xtest):
    """Full predictive blocks (latent, noise-free) at a test batch."""
    X = _check_test(model, Xtest)
    n, d = X.shape
    ext = model.extended
    Kx = cross_covariance(model.dataset.inputs, X, model.theta, a_grad=ext, b_grad=ext)
    Kss = cross_covariance(X, X, model.theta, a_grad=ext, b_grad=ext)
    mean = Kx.T @ model.alpha
    V = sla.solve_triangular(model.factor.lower, Kx, lower=True, check_finite=False)
    cov = Kss - V.T @ V
    cov = _clip_variances(0.5 * (cov + cov.T), n)
    if not ext:
        return PredictiveBatch(mean, np.zeros(0), cov, np.zeros((n, 0)), np.zeros((0, 0)))
    return PredictiveBatch(mean[:n], mean[n:], cov[:n, :n], cov[:n, n:], cov[n:, n:])


def predict_point_block(model, Xtest):
    """Predictive mean and covariance of the function values only.

    The test side is values-only; the training side stays extended under the
    with-derivatives scheme, so gradient observations still shape the result.
    """
    X = _check_test(model, Xtest)
    ext = model.extended
    Kx = cross_covariance(model.dataset.inputs, X, model.theta, a_grad=ext)
    Kss = cross_covariance(X, X, model.theta)
    V = sla.solve_triangular(model.factor.lower, Kx, lower=True, check_finite=False)
    cov = Kss - V.T @ V
    return Kx.T @ model.alpha, _clip_variances(0.5 * (cov + cov.T), X.shape[0])


def predict_marginal(model, Xtest, include_noise=False):
    """Predictive mean and per-point variance, without forming the full covariance."""
    X = _check_test(model, Xtest)
    Kx = cross_covariance(model.dataset.inputs, X, model.theta, a_grad=model.extended)
    V = sla.solve_triangular(model.factor.lower, Kx, lower=True, check_finite=False)
    var = np.maximum(model.theta.signal_variance - np.einsum("ij,ij->j", V, V), 0.0)
    if include_noise:
        var = var + model.theta.noise_variance
    return Kx.T @ model.alpha, var


def predict_mean(model, Xtest):
    """Predictive mean of the function values only."""
    X = _check_test(model, Xtest)
    return cross_covariance(model.dataset.inputs, X, model.theta, a_grad=model.extended).T @ model.alpha

"""scikit-learn compatible wrappers around the GP models and batch selection."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state, check_X_y

from .acquisition import Criterion, SearchBox, SearchConfig, optimize_batch, pool_select
from .gp import VALUES_ONLY, WITH_DERIVATIVES, Dataset, OptimizerConfig, condition, fit, predict
from .kernel import SEHyperparams

__all__ = ["GPDerivativeRegressor", "BatchActiveLearner"]


class GPDerivativeRegressor(RegressorMixin, BaseEstimator):
    """GP regression with an SE kernel, optionally trained on gradient observations.

    Parameters
    ----------
    signal_variance : float, default=1.0
        Initial (or fixed, if ``optimize=False``) kernel variance.
    lengthscale : float or array-like of shape (n_features,), default=1.0
        Initial lengthscale(s).
    noise_variance : float, default=1e-4
        Initial observation noise variance, shared by values and gradients.
    optimize : bool, default=True
        Maximize the log marginal likelihood during ``fit``.
    n_restarts : int, default=4
        Perturbed restarts in addition to the initial hyperparameters.
    random_state : int, RandomState or None
        Seeds the restarts.

    Attributes
    ----------
    model_ : GpModel
    theta_ : SEHyperparams
    log_marginal_likelihood_value_ : float
    with_gradients_ : bool
    """

    def __init__(
        self,
        signal_variance=1.0,
        lengthscale=1.0,
        noise_variance=1e-4,
        optimize=True,
        n_restarts=4,
        random_state=None,
    ):
        self.signal_variance = signal_variance
        self.lengthscale = lengthscale
        self.noise_variance = noise_variance
        self.optimize = optimize
        self.n_restarts = n_restarts
        self.random_state = random_state

    def _initial_theta(self, d):
        ls = np.broadcast_to(np.asarray(self.lengthscale, dtype=float), (d,))
        return SEHyperparams(self.signal_variance, tuple(ls), self.noise_variance)

    def fit(self, X, y, gradients=None):
        """Fit to values ``y`` and, when given, gradients of shape ``(n_samples, n_features)``."""
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        if gradients is not None:
            gradients = check_array(gradients)
            if gradients.shape != X.shape:
                raise ValueError(f"gradients have shape {gradients.shape}, expected {X.shape}")
        scheme = WITH_DERIVATIVES if gradients is not None else VALUES_ONLY
        data = Dataset(X, y, gradients)
        theta = self._initial_theta(X.shape[1])
        if self.optimize:
            seed = check_random_state(self.random_state).randint(2**31 - 1)
            self.model_ = fit(data, scheme, theta, OptimizerConfig(starts=self.n_restarts + 1), seed)
        else:
            self.model_ = condition(data, scheme, theta)
        self.theta_ = self.model_.theta
        self.log_marginal_likelihood_value_ = self.model_.lml
        self.with_gradients_ = gradients is not None
        return self

    def predict(self, X, return_std=False, return_cov=False, return_grad=False):
        """Predictive mean of the latent function.

        Optionally also returns the standard deviation or full covariance of
        the values, and the predictive mean gradient ``(n_samples, n_features)``.
        """
        check_is_fitted(self, "model_")
        if return_std and return_cov:
            raise ValueError("at most one of return_std and return_cov may be set")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        pb = predict(self.model_, X)
        out = [pb.mean_points]
        if return_std:
            out.append(np.sqrt(np.diag(pb.cov_points)))
        if return_cov:
            out.append(pb.cov_points)
        if return_grad:
            out.append(pb.mean_grads.reshape(X.shape))
        return out[0] if len(out) == 1 else tuple(out)


class BatchActiveLearner(BaseEstimator):
    """Chooses the next batch for a fitted :class:`GPDerivativeRegressor`.

    Parameters
    ----------
    criterion : {"D", "A", "E"}, default="D"
        Log-determinant, trace or largest eigenvalue of the predictive
        covariance of the batch values.
    batch_size : int, default=2
    n_starts : int, default=10
        Random starts of the continuous search in :meth:`propose`.
    random_state : int, RandomState or None
    """

    def __init__(self, criterion="D", batch_size=2, n_starts=10, random_state=None):
        self.criterion = criterion
        self.batch_size = batch_size
        self.n_starts = n_starts
        self.random_state = random_state

    def propose(self, regressor, lower, upper):
        """Batch of ``batch_size`` points in the box ``[lower, upper]``."""
        check_is_fitted(regressor, "model_")
        seed = check_random_state(self.random_state).randint(2**31 - 1)
        prop = optimize_batch(
            regressor.model_,
            SearchBox(lower, upper),
            self.batch_size,
            Criterion.parse(self.criterion),
            SearchConfig(starts=self.n_starts),
            seed,
        )
        self.score_ = prop.score
        return prop.points

    def select(self, regressor, pool):
        """Indices of ``batch_size`` rows of ``pool`` chosen greedily."""
        check_is_fitted(regressor, "model_")
        pool = check_array(pool)
        return np.asarray(pool_select(regressor.model_, pool, self.batch_size, Criterion.parse(self.criterion)))

"""Squared exponential kernel with first and mixed second derivative blocks.

Extended matrices use the layout ``[all values | all gradients]``: for ``n``
points in ``d`` dimensions, rows ``0..n-1`` hold function values and rows
``n + i*d + a`` hold the partial derivative along axis ``a`` at point ``i``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch

__all__ = [
    "SEHyperparams",
    "se_kernel",
    "se_grad_first",
    "se_hess_cross",
    "extended_block",
    "cross_covariance",
    "PairwiseDifferences",
    "covariance_from_differences",
    "assemble_gram",
    "assemble_extended_gram",
    "assemble_cross",
]

_FLUSH = 1e-300


@dataclass(frozen=True)
class SEHyperparams:
    """Signal variance, per-axis lengthscales ``l_k`` (not squared) and noise variance."""

    signal_variance: float
    lengthscales: tuple
    noise_variance: float = 0.0

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lengthscales, dtype=float)))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")
        if len(ls) == 0 or not all(v > 0 for v in ls):
            raise ValueError("lengthscales must be positive")
        if not self.noise_variance >= 0:
            raise ValueError("noise_variance must be non-negative")
        object.__setattr__(self, "_ls", np.asarray(ls))

    @property
    def dim(self):
        return len(self.lengthscales)

    @property
    def ls(self):
        return self._ls

    def to_log(self):
        """Pack as ``[log sf2, log l_1..l_d, log sn2]``."""
        return np.concatenate(
            [[np.log(self.signal_variance)], np.log(self.ls), [np.log(max(self.noise_variance, 1e-300))]]
        )

    @classmethod
    def from_log(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(float(np.exp(v[0])), tuple(np.exp(v[1:-1])), float(np.exp(v[-1])))

    def replace(self, **changes):
        kw = dict(
            signal_variance=self.signal_variance,
            lengthscales=self.lengthscales,
            noise_variance=self.noise_variance,
        )
        kw.update(changes)
        return SEHyperparams(**kw)


def _point(x, theta):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != theta.dim:
        raise DimensionMismatch(f"point of shape {x.shape} does not match dimension {theta.dim}")
    return x


def _points(X, theta):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, theta.dim) if theta.dim > 1 else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != theta.dim:
        raise DimensionMismatch(f"inputs of shape {X.shape} do not match dimension {theta.dim}")
    return X


def se_kernel(xi, xj, theta):
    xi, xj = _point(xi, theta), _point(xj, theta)
    q = np.sum(((xi - xj) / theta.ls) ** 2)
    k = theta.signal_variance * np.exp(-0.5 * q)
    return 0.0 if k < _FLUSH else float(k)


def se_grad_first(xi, xj, theta, wrt="xi"):
    """Gradient of the kernel with respect to ``xi`` (or ``xj`` when ``wrt="xj"``)."""
    xi, xj = _point(xi, theta), _point(xj, theta)
    g = -(xi - xj) / theta.ls**2 * se_kernel(xi, xj, theta)
    if wrt == "xi":
        return g
    if wrt == "xj":
        return -g
    raise ValueError("wrt must be 'xi' or 'xj'")


def se_hess_cross(xi, xj, theta):
    """Mixed second derivative d^2 k / (d xi d xj), a ``d x d`` matrix."""
    xi, xj = _point(xi, theta), _point(xj, theta)
    rs = (xi - xj) / theta.ls**2
    return (np.diag(1.0 / theta.ls**2) - np.outer(rs, rs)) * se_kernel(xi, xj, theta)


def extended_block(xi, xj, theta):
    """The ``(1+d) x (1+d)`` covariance of ``(f, grad f)`` at ``xi`` with the same at ``xj``."""
    d = theta.dim
    out = np.empty((1 + d, 1 + d))
    out[0, 0] = se_kernel(xi, xj, theta)
    out[0, 1:] = se_grad_first(xi, xj, theta, wrt="xj")
    out[1:, 0] = se_grad_first(xi, xj, theta, wrt="xi")
    out[1:, 1:] = se_hess_cross(xi, xj, theta)
    return out


def cross_covariance(A, B, theta, a_grad=False, b_grad=False):
    """Covariance between the (optionally extended) representations of ``A`` and ``B``.

    Rows follow ``A`` (values, then gradients if ``a_grad``), columns follow
    ``B`` the same way.
    """
    A, B = _points(A, theta), _points(B, theta)
    return covariance_from_differences(PairwiseDifferences(A, B), theta, a_grad, b_grad)


class PairwiseDifferences:
    """Cached ``A_i - B_j`` and their squares, reusable across hyperparameters."""

    def __init__(self, A, B):
        self.r = A[:, None, :] - B[None, :, :]
        self.r2 = self.r * self.r

    @property
    def shape(self):
        return self.r.shape


def covariance_from_differences(diff, theta, a_grad=False, b_grad=False):
    """:func:`cross_covariance` given precomputed :class:`PairwiseDifferences`."""
    na, nb, d = diff.shape
    if d != theta.dim:
        raise DimensionMismatch(f"differences of dimension {d}, hyperparameters of dimension {theta.dim}")
    inv_l2 = 1.0 / theta.ls**2
    k = theta.signal_variance * np.exp(-0.5 * (diff.r2 @ inv_l2))
    k[k < _FLUSH] = 0.0

    out = np.empty((na * (1 + d) if a_grad else na, nb * (1 + d) if b_grad else nb))
    out[:na, :nb] = k
    if not (a_grad or b_grad):
        return out
    # gradient rows/columns of axis a sit at stride d starting from offset a
    rs = [diff.r[:, :, a] * inv_l2[a] for a in range(d)]
    rk = [rs[a] * k for a in range(d)]
    for a in range(d):
        if b_grad:
            out[:na, nb + a :: d] = rk[a]
        if a_grad:
            out[na + a :: d, :nb] = -rk[a]
    if a_grad and b_grad:
        for a in range(d):
            rows = out[na + a :: d]
            for b in range(d):
                blk = rows[:, nb + b :: d]
                np.multiply(rk[a], -rs[b], out=blk)
                if a == b:
                    blk += inv_l2[a] * k
    return out


def assemble_gram(X, theta):
    """Plain kernel matrix of the values (no derivative rows)."""
    K = cross_covariance(X, X, theta)
    return 0.5 * (K + K.T)


def assemble_extended_gram(X, theta):
    K = cross_covariance(X, X, theta, a_grad=True, b_grad=True)
    return 0.5 * (K + K.T)


def assemble_cross(Xtrain, Xtest, theta, mode="values-only-test"):
    """Cross-covariance from the extended training representation to test columns.

    ``mode`` is ``"values-only-test"`` (``n`` columns) or ``"extended-test"``
    (``n(1+d)`` columns).
    """
    if mode not in ("values-only-test", "extended-test"):
        raise ValueError(f"unknown mode {mode!r}")
    return cross_covariance(Xtrain, Xtest, theta, a_grad=True, b_grad=mode == "extended-test")

"""Batch acquisition by D-, A- or E-optimality of the predictive point covariance.

Continuous batches are found by multi-start projected ascent with central
finite-difference gradients over the flattened batch coordinates. Pools are
handled greedily, one point per pass. The safe variant restricts the same
search to batches whose safety functional exceeds ``1 - alpha``.
"""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import EmptyBoxError, NoFeasibleStart, NotPositiveDefinite, PoolTooSmall
from .gp import predict_point_block
from .kernel import cross_covariance
from .linalg import cholesky_psd, log_det_from_factor, sym_eigenvalues, sym_matrix
from .safety import zeta

__all__ = [
    "Criterion",
    "SearchBox",
    "SearchConfig",
    "BatchProposal",
    "BoxParametrization",
    "criterion_value",
    "batch_score",
    "optimize_batch",
    "optimize_batch_safe",
    "pool_select",
]

D_JITTER = 1e-10


class Criterion(str, enum.Enum):
    D = "D"  # log-determinant
    A = "A"  # trace
    E = "E"  # largest eigenvalue

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"criterion must be one of D, A, E; got {value!r}") from None


@dataclass(frozen=True)
class SearchBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise EmptyBoxError(f"bounds of shapes {lo.shape} and {hi.shape}")
        if not np.all(lo < hi):
            raise EmptyBoxError("lower must be strictly below upper in every dimension")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return bool(np.all((X >= self.lower) & (X <= self.upper)))

    def sample(self, rng, n):
        return self.lower + rng.random((n, self.dim)) * self.width

    def grid(self, per_axis):
        axes = [np.linspace(l, u, per_axis) for l, u in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])


@dataclass(frozen=True)
class SearchConfig:
    """Settings for the continuous batch optimizer."""

    starts: int = 10
    max_iter: int = 100
    fd_step: float = 1e-4
    tol: float = 1e-9
    initial_step: float = 0.1
    armijo: float = 1e-4
    max_halvings: int = 30
    max_resamples: int = 100


@dataclass(frozen=True)
class BatchProposal:
    points: np.ndarray
    score: float
    feasible: bool = True
    zeta: float = float("nan")
    params: np.ndarray = None
    rejected: int = 0


class BoxParametrization:
    """Identity parametrization: the batch coordinates themselves, each in ``box``."""

    def __init__(self, box, n):
        self.point_box = box
        self.n = n
        self.box = SearchBox(np.tile(box.lower, n), np.tile(box.upper, n))

    def __call__(self, params):
        return np.asarray(params, dtype=float).reshape(self.n, self.point_box.dim)


def criterion_value(cov, c):
    """Scalar design criterion of a covariance matrix; larger means more informative."""
    c = Criterion.parse(c)
    cov = sym_matrix(cov)
    if c is Criterion.D:
        return log_det_from_factor(cholesky_psd(cov, D_JITTER))
    if c is Criterion.A:
        return float(np.trace(cov))
    return float(sym_eigenvalues(cov)[0])


def _point_cov(model, X):
    theta = model.theta
    Kx = cross_covariance(model.dataset.inputs, X, theta, a_grad=model.extended)
    V = sla.solve_triangular(model.factor.lower, Kx, lower=True, check_finite=False)
    cov = cross_covariance(X, X, theta) - V.T @ V
    idx = np.arange(X.shape[0])
    cov[idx, idx] = np.maximum(cov[idx, idx], 0.0)
    return cov


def batch_score(model, batch, c):
    """Criterion of the predictive point covariance at ``batch``; ``-inf`` if singular."""
    cov = _point_cov(model, np.asarray(batch, dtype=float).reshape(-1, model.dataset.dim))
    try:
        return criterion_value(cov, c)
    except NotPositiveDefinite:
        return -np.inf


def _fd_gradient(f, u, h):
    g = np.empty_like(u)
    for k in range(u.shape[0]):
        e = np.zeros_like(u)
        e[k] = h
        fp, fm = f(u + e), f(u - e)
        if np.isfinite(fp) and np.isfinite(fm):
            g[k] = (fp - fm) / (2 * h)
        elif np.isfinite(fp):
            g[k] = 1.0
        elif np.isfinite(fm):
            g[k] = -1.0
        else:
            g[k] = 0.0
    return g


class _Ascent:
    """Projected gradient ascent on the unit cube with Armijo backtracking."""

    def __init__(self, objective, cfg, feasible=None):
        self.objective = objective
        self.cfg = cfg
        self.feasible = feasible
        self.rejected = 0

    def run(self, u):
        cfg = self.cfg
        f = self.objective(u)
        step = cfg.initial_step
        for _ in range(cfg.max_iter):
            g = _fd_gradient(self.objective, u, cfg.fd_step)
            gmax = np.max(np.abs(g))
            if not np.isfinite(gmax) or gmax == 0.0:
                break
            direction = g / gmax
            accepted = False
            for _ in range(cfg.max_halvings):
                trial = np.clip(u + step * direction, 0.0, 1.0)
                if np.array_equal(trial, u):
                    break
                ft = self.objective(trial)
                if ft > f and ft >= f + cfg.armijo * g @ (trial - u):
                    if self.feasible is not None and not self.feasible(trial):
                        self.rejected += 1
                    else:
                        accepted = True
                        break
                step *= 0.5
            if not accepted:
                break
            gain = ft - f
            u, f = trial, ft
            step = min(2.0 * step, 1.0)
            if gain < cfg.tol * (1.0 + abs(f)):
                break
        return u, f


def _search(model, c, cfg, rng, param, feasible=None):
    c = Criterion.parse(c)
    pbox = param.box
    to_x = lambda u: pbox.lower + u * pbox.width  # noqa: E731

    def objective(u):
        return batch_score(model, param(to_x(u)), c)

    ascent = _Ascent(objective, cfg, feasible=None if feasible is None else (lambda u: feasible(param(to_x(u)))))
    best = None
    for i in range(max(cfg.starts, 1)):
        u0 = rng.random(pbox.dim)
        if feasible is not None:
            for _ in range(cfg.max_resamples):
                if feasible(param(to_x(u0))):
                    break
                ascent.rejected += 1
                u0 = rng.random(pbox.dim)
            else:
                continue
        u, f = ascent.run(u0)
        if best is None or f > best[0]:
            best = (f, i, u)
    if best is None:
        return None, ascent.rejected
    params = to_x(best[2])
    return (params, param(params), best[0]), ascent.rejected


def optimize_batch(model, box, n, c, opt=None, rng=None, parametrization=None):
    """Maximize the criterion of the predictive point covariance over a batch of ``n`` points."""
    cfg = opt or SearchConfig()
    rng = np.random.default_rng(rng)
    param = parametrization or BoxParametrization(box, n)
    found, _ = _search(model, c, cfg, rng, param)
    params, points, _ = found
    return BatchProposal(points, batch_score(model, points, c), params=params)


def optimize_batch_safe(model, safety, alpha, box, n, c, opt=None, rng=None, parametrization=None):
    """Like :func:`optimize_batch`, but only accepts batches with ``zeta > 1 - alpha``.

    Infeasible starts are resampled and infeasible ascent steps are refused;
    ``rejected`` on the result counts both.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    cfg = opt or SearchConfig()
    rng = np.random.default_rng(rng)
    param = parametrization or BoxParametrization(box, n)
    threshold = 1.0 - alpha

    def feasible(points):
        return zeta(safety, points) > threshold

    found, rejected = _search(model, c, cfg, rng, param, feasible)
    if found is None:
        raise NoFeasibleStart(
            f"no batch with zeta > {threshold:g} found after {cfg.max_resamples} resamples per start"
        )
    params, points, _ = found
    return BatchProposal(
        points, batch_score(model, points, c), True, zeta(safety, points), params, rejected
    )


def _stacked_criterion(mats, c):
    """Criterion for a stack of small covariance matrices ``(m, k, k)``."""
    if c is Criterion.A:
        return np.trace(mats, axis1=1, axis2=2)
    w = np.linalg.eigvalsh(mats)
    if c is Criterion.E:
        return w[:, -1]
    out = np.full(mats.shape[0], -np.inf)
    good = w[:, 0] > 0
    out[good] = np.sum(np.log(w[good]), axis=1)
    for i in np.flatnonzero(~good):
        try:
            out[i] = criterion_value(mats[i], c)
        except NotPositiveDefinite:
            pass
    return out


def pool_select(model, pool, n, c):
    """Greedily pick ``n`` pool indices maximizing the criterion of the joint point covariance.

    Each pass adds the candidate that maximizes the criterion over the already
    chosen points plus that candidate; chosen points are not treated as
    observed. Ties go to the lowest index.
    """
    c = Criterion.parse(c)
    pool = np.asarray(pool, dtype=float).reshape(-1, model.dataset.dim)
    m = pool.shape[0]
    if n < 1 or m < n:
        raise PoolTooSmall(f"cannot choose {n} points from a pool of {m}")
    theta = model.theta
    Kx = cross_covariance(model.dataset.inputs, pool, theta, a_grad=model.extended)
    V = sla.solve_triangular(model.factor.lower, Kx, lower=True, check_finite=False)
    var = np.maximum(theta.signal_variance - np.einsum("ij,ij->j", V, V), 0.0)

    chosen = []
    rows = np.zeros((0, m))
    for _ in range(n):
        k = len(chosen)
        mats = np.empty((m, k + 1, k + 1))
        if k:
            S = np.asarray(chosen)
            mats[:, :k, :k] = rows[:, S].T[None, :, :]
            mats[:, :k, k] = rows.T
            mats[:, k, :k] = rows.T
            mats[:, :k, :k] = 0.5 * (mats[:, :k, :k] + mats[:, :k, :k].transpose(0, 2, 1))
        mats[:, k, k] = var
        scores = _stacked_criterion(mats, c)
        scores[chosen] = -np.inf
        if np.isfinite(scores).any():
            pick = int(np.argmax(scores))
        else:
            pick = int(np.setdiff1d(np.arange(m), chosen)[0])
        chosen.append(pick)
        new_row = cross_covariance(pool[pick : pick + 1], pool, theta)[0] - V[:, pick] @ V
        new_row[pick] = var[pick]
        rows = np.vstack([rows, new_row])
    return chosen

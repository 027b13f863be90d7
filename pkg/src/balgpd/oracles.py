"""Ground-truth functions, gradient estimators and data ingestion for the experiments."""

import re
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .acquisition import SearchBox
from .exceptions import (
    CollinearNeighborhood,
    EmptyFile,
    HistoryTooShort,
    ParseError,
    TooFewPoints,
)

__all__ = [
    "FunctionOracle",
    "FDGradient",
    "ElevationDataset",
    "cardinal_sine",
    "cardinal_sine_oracle",
    "finite_diff_gradient",
    "scattered_gradient",
    "estimate_gradients",
    "bump_surface",
    "synthetic_elevation",
    "PLANT_WEIGHTS",
    "PLANT_Z_MAX",
    "plant_response",
    "synthetic_safe_plant",
    "lagged_input",
    "RampParametrization",
    "load_elevation_csv",
    "write_gradient_csv",
]


@dataclass(frozen=True)
class FunctionOracle:
    """A test function returning ``(value, gradient)`` for one ``d``-vector, plus noise levels."""

    eval: object
    domain: SearchBox
    noise_point: float = 0.0
    noise_grad: float = 0.0

    def __post_init__(self):
        if self.noise_point < 0 or self.noise_grad < 0:
            raise ValueError("noise levels must be non-negative")

    def truth(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.domain.dim)
        vals = [self.eval(x) for x in X]
        y = np.array([v for v, _ in vals], dtype=float)
        g = np.array([np.atleast_1d(gr) for _, gr in vals], dtype=float).reshape(X.shape)
        return y, g

    def query(self, X, rng):
        """Noisy values and gradients at the rows of ``X``."""
        y, g = self.truth(X)
        y = y + self.noise_point * rng.standard_normal(y.shape)
        g = g + self.noise_grad * rng.standard_normal(g.shape)
        return y, g


def cardinal_sine(x):
    """``f(x) = 10 sin(x - 10) / (x - 10)`` and its derivative."""
    x = float(np.asarray(x, dtype=float).reshape(-1)[0])
    s = x - 10.0
    if abs(s) < 1e-8:
        return 10.0, 0.0
    value = 10.0 * np.sin(s) / s
    deriv = 10.0 * np.cos(s) / s - 10.0 * np.sin(s) / s**2
    return float(value), float(deriv)


def cardinal_sine_oracle(noise_point=0.01, noise_grad=0.01, box=(-10.0, 15.0)):
    def f(x):
        v, g = cardinal_sine(x[0])
        return v, np.array([g])

    return FunctionOracle(f, SearchBox([box[0]], [box[1]]), noise_point, noise_grad)


@dataclass(frozen=True)
class FDGradient:
    gradient: np.ndarray
    one_sided: np.ndarray

    @property
    def flagged(self):
        return bool(self.one_sided.any())


def finite_diff_gradient(f, x, h, box=None):
    """Central-difference gradient of a scalar function.

    When ``box`` is given and the stencil would leave it along an axis, that
    axis falls back to a one-sided difference and is flagged in ``one_sided``.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grad = np.empty_like(x)
    flags = np.zeros(x.shape, dtype=bool)
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        up_ok = box is None or x[k] + h <= box.upper[k]
        down_ok = box is None or x[k] - h >= box.lower[k]
        if up_ok and down_ok:
            grad[k] = (f(x + e) - f(x - e)) / (2 * h)
        elif up_ok:
            grad[k] = (f(x + e) - f(x)) / h
            flags[k] = True
        elif down_ok:
            grad[k] = (f(x) - f(x - e)) / h
            flags[k] = True
        else:
            raise ValueError(f"step {h} is wider than the domain along axis {k}")
    return FDGradient(grad, flags)


def _neighbours(coords, target_index, k=4, tree=None):
    if tree is None:
        d = np.linalg.norm(coords - coords[target_index], axis=1)
        d[target_index] = np.inf
        order = np.lexsort((np.arange(coords.shape[0]), d))
        return order[:k]
    m = coords.shape[0]
    q = min(m, k + 9)
    _, idx = tree.query(coords[target_index], k=q)
    idx = np.atleast_1d(idx)
    idx = idx[(idx != target_index) & (idx < m)]
    d = np.linalg.norm(coords[idx] - coords[target_index], axis=1)
    order = np.lexsort((idx, d))
    return idx[order[:k]]


def _slope(coords, heights, target_index, nbrs):
    V = coords[nbrs] - coords[target_index]
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0):
        raise CollinearNeighborhood("a neighbour coincides with the target point")
    Vn = V / norms[:, None]
    sigma = (heights[nbrs] - heights[target_index]) / norms
    A = Vn.T @ Vn
    if np.linalg.cond(A) > 1e12:
        raise CollinearNeighborhood(f"neighbours of point {target_index} are collinear")
    return np.linalg.solve(A, Vn.T @ sigma)


def scattered_gradient(points, target_index):
    """Least-squares slope at one point from its four nearest neighbours.

    ``points`` is ``(m, 3)`` with columns ``x1, x2, y``. Both sides of the
    offset system are divided by the neighbour distance, so every neighbour
    contributes a directional slope with equal weight; the estimate is exact
    for planes.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must have shape (m, 3)")
    if points.shape[0] < 5:
        raise TooFewPoints("need at least 5 points (the target and 4 neighbours)")
    coords, heights = points[:, :2], points[:, 2]
    return _slope(coords, heights, target_index, _neighbours(coords, target_index))


def estimate_gradients(coords, heights):
    """Scattered-data gradient estimate at every point."""
    coords = np.asarray(coords, dtype=float)
    heights = np.asarray(heights, dtype=float)
    if coords.shape[0] < 5:
        raise TooFewPoints("need at least 5 points")
    tree = cKDTree(coords)
    out = np.empty_like(coords)
    for i in range(coords.shape[0]):
        out[i] = _slope(coords, heights, i, _neighbours(coords, i, tree=tree))
    return out


@dataclass(frozen=True)
class ElevationDataset:
    coordinates: np.ndarray
    heights: np.ndarray
    estimated_gradients: np.ndarray = None

    @property
    def m(self):
        return self.coordinates.shape[0]

    def with_gradients(self):
        return ElevationDataset(
            self.coordinates, self.heights, estimate_gradients(self.coordinates, self.heights)
        )


BUMPS = (
    # centre, height, width
    ((2.5, 3.0), 3.0, 1.5),
    ((7.0, 6.5), 2.0, 1.0),
    ((4.0, 8.0), -1.5, 2.0),
)


def bump_surface(x):
    """Sum of three Gaussian bumps on ``[0, 10]^2``; returns ``(value, gradient)``."""
    x = np.asarray(x, dtype=float)
    value, grad = 0.0, np.zeros(2)
    for centre, h, w in BUMPS:
        r = x - np.asarray(centre)
        b = h * np.exp(-0.5 * (r @ r) / w**2)
        value += b
        grad += -r / w**2 * b
    return float(value), grad


def synthetic_elevation(grid=50, extent=10.0):
    """Elevation dataset sampled from :func:`bump_surface` on a regular grid."""
    axis = np.linspace(0.0, extent, grid)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    coords = np.column_stack([g1.reshape(-1), g2.reshape(-1)])
    heights = np.array([bump_surface(c)[0] for c in coords])
    return ElevationDataset(coords, heights)


# Safe-plant surrogate. Inputs are the lagged actuation u and speed v, in the order
# (u_i, u_{i-1}, u_{i-2}, u_{i-3}, v_i, v_{i-1}, v_{i-3}); v_{i-2} is not used.
PLANT_WEIGHTS = np.array([0.4, 0.3, 0.2, 0.1, 0.45, 0.35, 0.2])
PLANT_COUPLING = 0.25
PLANT_Y_CAP = 1.0
PLANT_Z_MAX = 1.0
PLANT_LAGS = 3


def plant_response(x):
    """Output, safety value and output gradient at one lagged input vector.

    ``y = tanh(w . x) + 0.25 u_i v_i`` and ``z = y / 1.0``. The region near
    the all-ones corner has ``z > 1`` (unsafe); the origin maps to zero.
    """
    x = np.asarray(x, dtype=float)
    t = np.tanh(PLANT_WEIGHTS @ x)
    y = t + PLANT_COUPLING * x[0] * x[4]
    grad = (1.0 - t**2) * PLANT_WEIGHTS
    grad[0] += PLANT_COUPLING * x[4]
    grad[4] += PLANT_COUPLING * x[0]
    return float(y), float(y / PLANT_Y_CAP), grad


def lagged_input(u_history, v_history):
    u = np.asarray(u_history, dtype=float)
    v = np.asarray(v_history, dtype=float)
    if u.shape[0] <= PLANT_LAGS or v.shape[0] <= PLANT_LAGS:
        raise HistoryTooShort(f"need at least {PLANT_LAGS + 1} samples of each signal")
    return np.array([u[-1], u[-2], u[-3], u[-4], v[-1], v[-2], v[-4]])


def synthetic_safe_plant(u_history, v_history):
    """Plant response at the latest time step of the given signal histories."""
    return plant_response(lagged_input(u_history, v_history))


class RampParametrization:
    """Trajectories as linear ramps ``(u_start, u_end, v_start, v_end)`` in ``[0, 1]^4``.

    Each ramp is sampled at ``points + 3`` steps; the last ``points`` steps
    give the lagged input vectors of the batch.
    """

    def __init__(self, points=5, lower=0.0, upper=1.0):
        self.n = points
        self.box = SearchBox([lower] * 4, [upper] * 4)
        self.point_box = SearchBox([lower] * 7, [upper] * 7)
        self._s = np.linspace(0.0, 1.0, points + PLANT_LAGS)

    def signals(self, params):
        u0, u1, v0, v1 = np.asarray(params, dtype=float)
        return u0 + (u1 - u0) * self._s, v0 + (v1 - v0) * self._s

    def __call__(self, params):
        u, v = self.signals(params)
        return np.array([lagged_input(u[: i + 1], v[: i + 1]) for i in range(PLANT_LAGS, u.shape[0])])


_SPLIT = re.compile(r"[,\s]+")


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_elevation_csv(path, subsample_fraction=1.0, rng_seed=0):
    """Read ``x1, x2, y`` rows from a text file and optionally subsample them.

    Separators may be commas, tabs or spaces; ``#`` lines are comments and a
    first line of non-numeric column names is treated as a header. Duplicate
    coordinates keep their first occurrence.
    """
    if not 0.0 < subsample_fraction <= 1.0:
        raise ValueError("subsample_fraction must lie in (0, 1]")
    rows, seen = [], set()
    first = True
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            toks = [t for t in _SPLIT.split(line) if t]
            if first:
                first = False
                if len(toks) == 3 and not any(_is_number(t) for t in toks):
                    continue
            if len(toks) != 3:
                raise ParseError(f"expected 3 fields, found {len(toks)}", lineno)
            try:
                x1, x2, y = (float(t) for t in toks)
            except ValueError:
                raise ParseError(f"non-numeric field in {line!r}", lineno) from None
            if (x1, x2) in seen:
                continue
            seen.add((x1, x2))
            rows.append((x1, x2, y))
    if not rows:
        raise EmptyFile(f"{path} contains no data rows")
    data = np.array(rows)
    m = data.shape[0]
    k = max(1, int(round(subsample_fraction * m)))
    if k < m:
        idx = np.sort(np.random.default_rng(rng_seed).choice(m, size=k, replace=False))
        data = data[idx]
    return ElevationDataset(data[:, :2].copy(), data[:, 2].copy())


def write_gradient_csv(dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x1,x2,y,dy_dx1,dy_dx2\n")
        for (x1, x2), y, (g1, g2) in zip(dataset.coordinates, dataset.heights, dataset.estimated_gradients):
            fh.write(f"{x1:.17g},{x2:.17g},{y:.17g},{g1:.17g},{g2:.17g}\n")

"""Experiment configuration, the active-learning loops, metrics and CSV output.

Three experiments are wired up: a 1-d cardinal sine over a continuous box, a
synthetic safety-constrained plant explored along input ramps, and a
pool-based reconstruction of an elevation surface. Each runs under one of
three schemes:

``balgpd``
    GP with derivative observations; batches chosen by the design criterion.
``balgp``
    Values-only GP; batches chosen by the design criterion.
``random``
    Values-only GP; batches drawn uniformly (from the box or the pool).

A run is fully determined by its configuration and seed. Every random draw
comes from a named child stream of ``numpy.random.SeedSequence(seed)``, so
the schemes of a comparison share the initial design and test set.
"""

import dataclasses
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import acquisition as acq
from .acquisition import BoxParametrization, Criterion, SearchBox, SearchConfig, batch_score
from .exceptions import ConfigError, DimensionMismatch, NoFeasibleStart
from .gp import (
    VALUES_ONLY,
    WITH_DERIVATIVES,
    Dataset,
    OptimizerConfig,
    condition,
    fit,
    predict_mean,
    predict_point_block,
)
from .information import (
    check_criterion_dominance,
    check_lemma1,
    check_proposition1,
    check_theorem1,
    information_gain,
    random_instance,
)
from .kernel import SEHyperparams
from .oracles import (
    PLANT_Z_MAX,
    RampParametrization,
    cardinal_sine_oracle,
    load_elevation_csv,
    plant_response,
    synthetic_elevation,
)
from .safety import fit_safety, update_safety, zeta

__all__ = [
    "EXPERIMENTS",
    "SCHEMES",
    "RUN_COLUMNS",
    "AGGREGATE_COLUMNS",
    "ExperimentConfig",
    "RoundRecord",
    "RunResult",
    "Aggregate",
    "parse_config",
    "load_config",
    "run_experiment",
    "rmse",
    "run_replications",
    "aggregate",
    "emit_csv",
    "read_csv",
    "lemma1_run",
    "validate_theory",
]

EXPERIMENTS = ("cardinal-sine", "safe-plant", "map")
SCHEMES = ("balgpd", "balgp", "random")
RUN_COLUMNS = ("round", "points_total", "rmse", "criterion", "criterion_value", "zeta_min", "wall_ms")
AGGREGATE_COLUMNS = (
    "round",
    "points_total",
    "rmse_median",
    "rmse_q1",
    "rmse_q3",
    "criterion_value_median",
)

# Region the cardinal-sine initial design is drawn from.
SINE_INITIAL_REGION = (-0.5, 0.5)
# Initial ramps of the plant are drawn from this corner of the ramp box.
PLANT_INITIAL_REGION = (0.0, 0.3)
# Random schemes rejection-sample this many candidate batches before giving up.
RANDOM_MAX_DRAWS = 1000

_DEFAULTS = {
    "cardinal-sine": dict(
        rounds=13,
        batch_size=2,
        n_initial=4,
        box=SearchBox([-10.0], [15.0]),
        noise_point=0.01,
        noise_grad=0.01,
        alpha=None,
        test_grid_size=200,
    ),
    "safe-plant": dict(
        rounds=10,
        batch_size=5,
        n_initial=5,
        box=SearchBox([0.0] * 4, [1.0] * 4),
        noise_point=0.01,
        noise_grad=0.01,
        alpha=0.5,
        test_grid_size=200,
    ),
    "map": dict(
        rounds=50,
        batch_size=3,
        n_initial=25,
        box=SearchBox([0.0, 0.0], [10.0, 10.0]),
        noise_point=0.01,
        noise_grad=0.01,
        alpha=None,
        test_grid_size=50,
    ),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Seeded description of one experiment.

    Fields left as ``None`` are filled from the experiment's defaults by
    :meth:`resolved`. For ``safe-plant`` the box is over ramp parameters
    ``(u_start, u_end, v_start, v_end)``, ``batch_size`` is the number of ramp
    points and ``n_initial`` counts initial ramps. For ``map``,
    ``test_grid_size`` is the resolution per axis of the synthetic surface and
    ``n_initial`` counts grid points.
    """

    experiment: str = "cardinal-sine"
    scheme: str = "balgpd"
    criterion: Criterion = Criterion.D
    rounds: int = None
    batch_size: int = None
    n_initial: int = None
    box: SearchBox = None
    noise_point: float = None
    noise_grad: float = None
    alpha: float = None
    seed: int = 0
    replications: int = 1
    test_grid_size: int = None
    data_path: str = None
    subsample_fraction: float = 1.0

    def resolved(self):
        """A validated copy with experiment defaults filled in."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {self.experiment!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {', '.join(SCHEMES)}; got {self.scheme!r}")
        try:
            crit = Criterion.parse(self.criterion)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        changes = {"criterion": crit}
        for key, value in _DEFAULTS[self.experiment].items():
            if getattr(self, key) is None:
                changes[key] = value
        cfg = dataclasses.replace(self, **changes)
        cfg._validate()
        return cfg

    def _validate(self):
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.n_initial < 1:
            raise ConfigError("n_initial must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.test_grid_size < 2:
            raise ConfigError("test_grid_size must be >= 2")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.noise_point < 0 or self.noise_grad < 0:
            raise ConfigError("noise levels must be non-negative")
        if self.alpha is not None and not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ConfigError("subsample_fraction must lie in (0, 1]")
        expected = {"cardinal-sine": 1, "safe-plant": 4, "map": 2}[self.experiment]
        if self.box.dim != expected:
            raise ConfigError(f"{self.experiment} needs a {expected}-d box, got {self.box.dim}-d")
        if self.experiment == "safe-plant" and self.alpha is None:
            raise ConfigError("safe-plant needs alpha")
        if self.experiment == "map" and self.data_path is None:
            if self.n_initial + self.batch_size * self.rounds > self.test_grid_size**2:
                raise ConfigError("the pool is too small for the requested rounds")


# -- config files -------------------------------------------------------------------

_INT_FIELDS = {"rounds", "batch_size", "n_initial", "seed", "replications", "test_grid_size"}
_FLOAT_FIELDS = {"noise_point", "noise_grad", "alpha", "subsample_fraction"}
_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _parse_box(text):
    """``"lo,hi"`` per dimension, dimensions separated by ``;``."""
    lower, upper = [], []
    for part in text.split(";"):
        bits = [b.strip() for b in part.split(",")]
        if len(bits) != 2:
            raise ConfigError(f"box dimension {part.strip()!r} is not 'lo,hi'")
        try:
            lower.append(float(bits[0]))
            upper.append(float(bits[1]))
        except ValueError:
            raise ConfigError(f"box bound in {part.strip()!r} is not a number") from None
    try:
        return SearchBox(lower, upper)
    except ValueError as exc:
        raise ConfigError(f"invalid box: {exc}") from None


def _format_box(box):
    return ";".join(f"{lo:.17g},{hi:.17g}" for lo, hi in zip(box.lower, box.upper))


def parse_config(text):
    """Parse ``key = value`` lines into an :class:`ExperimentConfig`.

    Blank lines and lines starting with ``#`` are skipped. Keys are the field
    names of :class:`ExperimentConfig`; anything else is an error.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_FIELDS:
                values[key] = int(value)
            elif key in _FLOAT_FIELDS:
                values[key] = float(value)
            elif key == "box":
                values[key] = _parse_box(value)
            else:
                values[key] = value
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return ExperimentConfig(**values).resolved()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def format_config(cfg):
    """Inverse of :func:`parse_config` for a resolved config."""
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, SearchBox):
            v = _format_box(v)
        elif isinstance(v, Criterion):
            v = v.value
        elif isinstance(v, float):
            v = f"{v:.17g}"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# -- results ------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundRecord:
    round: int
    points_total: int
    rmse: float
    criterion: str
    criterion_value: float
    zeta_min: float = None
    wall_ms: float = None
    rejected: int = 0
    violations: int = 0


@dataclass
class RunResult:
    config: ExperimentConfig
    per_round: list = field(default_factory=list)
    theta: SEHyperparams = None
    n_train: int = 0
    failure: str = None
    test_description: str = ""

    @property
    def failed(self):
        return self.failure is not None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.per_round], dtype=float)


@dataclass(frozen=True)
class Aggregate:
    rows: tuple
    runs: tuple
    failures: int

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)


def rmse(model, test_inputs, test_truths):
    """Root mean squared error of the predictive mean of the values."""
    test_truths = np.asarray(test_truths, dtype=float).reshape(-1)
    X = np.asarray(test_inputs, dtype=float).reshape(-1, model.dataset.dim)
    if X.shape[0] != test_truths.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} test inputs but {test_truths.shape[0]} truths")
    if X.shape[0] == 0:
        raise DimensionMismatch("empty test set")
    mean = predict_mean(model, X)
    return float(np.sqrt(np.mean((mean - test_truths) ** 2)))


# -- problems -----------------------------------------------------------------------


def _initial_theta(X, y, width, noise):
    sf2 = max(float(np.mean((y - 0.0) ** 2)), 1e-2)
    return SEHyperparams(sf2, tuple(0.1 * np.asarray(width)), max(noise**2, 1e-6))


class _Problem:
    """Per-experiment ground truth, initial design, test set and batch proposals."""

    safe = False

    def __init__(self, cfg, streams):
        self.cfg = cfg
        self.streams = streams

    def uses_pool(self):
        return False


class _SineProblem(_Problem):
    def __init__(self, cfg, streams):
        super().__init__(cfg, streams)
        lo, hi = cfg.box.lower[0], cfg.box.upper[0]
        self.oracle = cardinal_sine_oracle(cfg.noise_point, cfg.noise_grad, (lo, hi))
        self.param = BoxParametrization(cfg.box, cfg.batch_size)
        self.test_X = np.linspace(lo, hi, cfg.test_grid_size).reshape(-1, 1)
        self.test_y = self.oracle.truth(self.test_X)[0]
        self.test_description = f"uniform grid of {cfg.test_grid_size} points over [{lo:g}, {hi:g}]"

    def initial(self, rng):
        lo, hi = SINE_INITIAL_REGION
        return rng.uniform(lo, hi, (self.cfg.n_initial, 1))

    def observe(self, X, rng):
        y, g = self.oracle.query(X, rng)
        return y, g, None

    def theta_init(self, X, y):
        return _initial_theta(X, y, self.cfg.box.width, max(self.cfg.noise_point, 1e-3))

    def random_batch(self, rng, safety=None):
        return self.cfg.box.sample(rng, self.cfg.batch_size), None


class _PlantProblem(_Problem):
    safe = True

    def __init__(self, cfg, streams):
        super().__init__(cfg, streams)
        self.param = RampParametrization(cfg.batch_size, 0.0, 1.0)
        self.param.box = cfg.box
        rng = np.random.default_rng(streams["test"])
        n_ramps = max(1, math.ceil(cfg.test_grid_size / cfg.batch_size))
        X = np.vstack([self.param(p) for p in cfg.box.sample(rng, n_ramps)])[: cfg.test_grid_size]
        self.test_X = X
        self.test_y = np.array([plant_response(x)[0] for x in X])
        self.test_description = f"{X.shape[0]} points from {n_ramps} seeded uniform ramps"

    def initial(self, rng):
        lo, hi = PLANT_INITIAL_REGION
        params = rng.uniform(lo, hi, (self.cfg.n_initial, 4))
        return np.vstack([self.param(p) for p in params])

    def observe(self, X, rng):
        cfg = self.cfg
        out = [plant_response(x) for x in X]
        y = np.array([o[0] for o in out])
        z = np.array([o[1] for o in out])
        g = np.array([o[2] for o in out])
        y = y + cfg.noise_point * rng.standard_normal(y.shape)
        z = z + cfg.noise_point * rng.standard_normal(z.shape)
        g = g + cfg.noise_grad * rng.standard_normal(g.shape)
        return y, g, z

    def theta_init(self, X, y):
        return _initial_theta(X, y, np.ones(X.shape[1]), max(self.cfg.noise_point, 1e-3))

    def random_batch(self, rng, safety):
        threshold = 1.0 - self.cfg.alpha
        rejected = 0
        for _ in range(RANDOM_MAX_DRAWS):
            points = self.param(self.cfg.box.sample(rng, 1)[0])
            if zeta(safety, points) > threshold:
                return points, rejected
            rejected += 1
        raise NoFeasibleStart(f"no random ramp with zeta > {threshold:g} in {RANDOM_MAX_DRAWS} draws")


class _MapProblem(_Problem):
    def __init__(self, cfg, streams):
        super().__init__(cfg, streams)
        if cfg.data_path:
            ds = load_elevation_csv(cfg.data_path, cfg.subsample_fraction, int(cfg.seed % 2**32))
            self.test_description = f"all {ds.m} points loaded from {cfg.data_path}"
        else:
            ds = synthetic_elevation(cfg.test_grid_size, float(cfg.box.upper[0] - cfg.box.lower[0]))
            ds = dataclasses.replace(ds, coordinates=ds.coordinates + cfg.box.lower)
            self.test_description = f"all points of the {cfg.test_grid_size}x{cfg.test_grid_size} synthetic grid"
        self.data = ds.with_gradients()
        self.test_X = self.data.coordinates
        self.test_y = self.data.heights
        self.available = np.ones(self.data.m, dtype=bool)
        self.span = np.ptp(self.data.coordinates, axis=0)

    def uses_pool(self):
        return True

    def _take(self, idx):
        idx = np.asarray(idx, dtype=int)
        self.available[idx] = False
        return self.data.coordinates[idx]

    def initial(self, rng):
        if self.cfg.n_initial + self.cfg.batch_size * self.cfg.rounds > self.data.m:
            raise ConfigError("the pool is too small for the requested rounds")
        return self._take(rng.choice(self.data.m, self.cfg.n_initial, replace=False))

    def observe(self, X, rng):
        idx = self._index(X)
        y = self.data.heights[idx] + self.cfg.noise_point * rng.standard_normal(idx.shape)
        g = self.data.estimated_gradients[idx] + self.cfg.noise_grad * rng.standard_normal((idx.size, 2))
        return y, g, None

    def _index(self, X):
        lookup = getattr(self, "_lookup", None)
        if lookup is None:
            lookup = self._lookup = {tuple(c): i for i, c in enumerate(self.data.coordinates)}
        return np.array([lookup[tuple(x)] for x in X])

    def theta_init(self, X, y):
        return _initial_theta(X, y, self.span, 1e-2)

    def pool(self):
        return np.flatnonzero(self.available)

    def random_batch(self, rng, safety=None):
        return self._take(rng.choice(self.pool(), self.cfg.batch_size, replace=False)), None


_PROBLEMS = {"cardinal-sine": _SineProblem, "safe-plant": _PlantProblem, "map": _MapProblem}
_STREAMS = ("init", "noise", "acquire", "fit", "test")

# Hyperparameter refits per round: warm start plus a few perturbed starts.
FIT_STARTS = {"cardinal-sine": 3, "safe-plant": 1, "map": 1}
REFIT_MAX_ITER = {"cardinal-sine": 200, "safe-plant": 30, "map": 10}
# Rounds between hyperparameter refits; other rounds only re-condition.
REFIT_EVERY = {"cardinal-sine": 1, "safe-plant": 1, "map": 1}
SEARCH = {
    "cardinal-sine": SearchConfig(starts=10),
    "safe-plant": SearchConfig(starts=5, max_iter=50),
    "map": None,
}


def _streams(seed):
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return dict(zip(_STREAMS, children))


def _propose(problem, cfg, model, safety, rng):
    """Return ``(points, rejected, zeta or None)`` for the next batch."""
    if cfg.scheme == "random":
        points, rejected = problem.random_batch(rng, safety)
        return points, rejected or 0, None if safety is None else zeta(safety, points)
    if problem.uses_pool():
        pool = problem.pool()
        picked = acq.pool_select(model, problem.data.coordinates[pool], cfg.batch_size, cfg.criterion)
        return problem._take(pool[picked]), 0, None
    opt = SEARCH[cfg.experiment]
    if safety is not None:
        prop = acq.optimize_batch_safe(
            model, safety, cfg.alpha, cfg.box, cfg.batch_size, cfg.criterion, opt, rng, problem.param
        )
        return prop.points, prop.rejected, prop.zeta
    prop = acq.optimize_batch(model, cfg.box, cfg.batch_size, cfg.criterion, opt, rng, problem.param)
    return prop.points, 0, None


def run_experiment(cfg):
    """Run the active-learning loop once and return its per-round metrics.

    Per round: propose a batch (design criterion, or uniform for ``random``),
    query values (and gradients for ``balgpd``), refit warm-started from the
    previous hyperparameters, and record test RMSE and the criterion value of
    the proposed batch under the model it was chosen with. A
    :class:`~balgpd.exceptions.NoFeasibleStart` ends the run early; the
    result then carries the reason in ``failure``.
    """
    cfg = cfg.resolved()
    streams = _streams(cfg.seed)
    problem = _PROBLEMS[cfg.experiment](cfg, streams)
    rng_init = np.random.default_rng(streams["init"])
    rng_noise = np.random.default_rng(streams["noise"])
    rng_acq = np.random.default_rng(streams["acquire"])
    rng_fit = np.random.default_rng(streams["fit"])
    scheme = WITH_DERIVATIVES if cfg.scheme == "balgpd" else VALUES_ONLY
    result = RunResult(cfg, test_description=problem.test_description)

    def fit_seed():
        return int(rng_fit.integers(2**32))

    X = problem.initial(rng_init)
    y, g, z = problem.observe(X, rng_noise)
    data = Dataset(X, y, g if scheme == WITH_DERIVATIVES else None)
    model = fit(data, scheme, problem.theta_init(X, y), OptimizerConfig(starts=5), fit_seed())
    refit = OptimizerConfig(starts=FIT_STARTS[cfg.experiment], max_iter=REFIT_MAX_ITER[cfg.experiment])
    safety = None
    if problem.safe:
        safety = fit_safety(X, z, PLANT_Z_MAX, problem.theta_init(X, z), OptimizerConfig(starts=5), fit_seed())

    for t in range(1, cfg.rounds + 1):
        start = time.perf_counter()
        try:
            points, rejected, zeta_min = _propose(problem, cfg, model, safety, rng_acq)
        except NoFeasibleStart as exc:
            result.failure = f"round {t}: {exc}"
            break
        score = batch_score(model, points, cfg.criterion)
        y, g, z = problem.observe(points, rng_noise)
        violations = 0
        if problem.safe:
            violations = int(np.sum([plant_response(p)[1] > PLANT_Z_MAX for p in points]))
        data = data.append(points, y, g if scheme == WITH_DERIVATIVES else None)
        if t % REFIT_EVERY[cfg.experiment] == 0:
            model = fit(data, scheme, model.theta, refit, fit_seed())
        else:
            model = condition(data, scheme, model.theta)
        if safety is not None:
            safety = update_safety(safety, points, z, refit, fit_seed())
        err = rmse(model, problem.test_X, problem.test_y)
        wall = 1e3 * (time.perf_counter() - start)
        result.per_round.append(
            RoundRecord(t, data.n, err, cfg.criterion.value, score, zeta_min, wall, rejected, violations)
        )
    result.theta = model.theta
    result.n_train = data.n
    return result


# -- replication and aggregation ----------------------------------------------------


def aggregate(runs):
    """Per-round median and quartiles of RMSE and median criterion value.

    Rounds missing from failed runs are aggregated over the runs that reached
    them.
    """
    by_round = {}
    for run in runs:
        for rec in run.per_round:
            by_round.setdefault(rec.round, []).append(rec)
    rows = []
    for t in sorted(by_round):
        recs = by_round[t]
        err = np.array([r.rmse for r in recs])
        crit = np.array([r.criterion_value for r in recs])
        q1, med, q3 = np.percentile(err, [25, 50, 75])
        rows.append(
            {
                "round": t,
                "points_total": recs[0].points_total,
                "rmse_median": float(med),
                "rmse_q1": float(q1),
                "rmse_q3": float(q3),
                "criterion_value_median": float(np.median(crit)),
            }
        )
    return Aggregate(tuple(rows), tuple(runs), sum(r.failed for r in runs))


def run_replications(cfg):
    """Run ``cfg.replications`` runs with seeds ``seed, seed+1, ...`` and aggregate them."""
    cfg = cfg.resolved()
    runs = [
        run_experiment(dataclasses.replace(cfg, seed=(cfg.seed + r) % 2**64))
        for r in range(cfg.replications)
    ]
    return aggregate(runs)


# -- CSV ----------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if math.isnan(v):
        return ""
    return f"{float(v):.17g}"


def emit_csv(result, path, include_timing=False):
    """Write a :class:`RunResult` or :class:`Aggregate` as CSV.

    ``wall_ms`` is left empty unless ``include_timing`` is set, so identical
    configurations produce identical files.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if isinstance(result, Aggregate):
            fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
            for row in result.rows:
                fh.write(",".join(_fmt(row[c]) for c in AGGREGATE_COLUMNS) + "\n")
            return
        fh.write(",".join(RUN_COLUMNS) + "\n")
        for r in result.per_round:
            cells = [r.round, r.points_total, r.rmse, r.criterion, r.criterion_value, r.zeta_min]
            cells.append(r.wall_ms if include_timing else None)
            fh.write(",".join(_fmt(c) for c in cells) + "\n")


def read_csv(path):
    """Read a file written by :func:`emit_csv` into a list of dicts (floats, or None for blanks)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            row = {}
            for name, cell in zip(header, cells):
                if cell == "":
                    row[name] = None
                elif name == "criterion":
                    row[name] = cell
                else:
                    row[name] = float(cell)
            rows.append(row)
    return header, rows


def write_outputs(agg, out_dir, include_timing=False):
    """Per-run CSVs, the aggregate CSV and a metadata file describing the runs."""
    os.makedirs(out_dir, exist_ok=True)
    for i, run in enumerate(agg.runs):
        emit_csv(run, os.path.join(out_dir, f"run_{i:03d}.csv"), include_timing)
    emit_csv(agg, os.path.join(out_dir, "aggregate.csv"))
    with open(os.path.join(out_dir, "metadata.txt"), "w", encoding="utf-8") as fh:
        if agg.runs:
            fh.write(format_config(agg.runs[0].config))
            fh.write(f"test_set = {agg.runs[0].test_description}\n")
        fh.write(f"failed_runs = {agg.failures}\n")
        for i, run in enumerate(agg.runs):
            if run.failed:
                fh.write(f"failure_{i:03d} = {run.failure}\n")


# -- theory checks ------------------------------------------------------------------


def lemma1_run(rng, rounds=10, batch_size=2, theta=None, box=(-5.0, 5.0)):
    """Sequential values-only run at fixed hyperparameters for the trace bound.

    Each round picks the batch maximizing the trace of the predictive
    covariance, records that covariance, then observes noisy values. Returns
    ``(lhs, rhs, passed)`` from :func:`~balgpd.information.check_lemma1`, using
    the realized information gain of the explored points given the initial
    one.
    """
    if theta is None:
        theta = SEHyperparams(rng.uniform(0.1, 1.0), (rng.uniform(0.5, 2.0),), rng.uniform(1e-2, 0.5))
    search = SearchBox([box[0]], [box[1]])
    X = search.sample(rng, 1)
    data = Dataset(X, rng.normal(size=1))
    history = []
    for _ in range(rounds):
        model = condition(data, VALUES_ONLY, theta)
        prop = acq.optimize_batch(model, search, batch_size, Criterion.A, SearchConfig(starts=3), rng)
        history.append(predict_point_block(model, prop.points)[1])
        data = data.append(prop.points, rng.normal(size=batch_size))
    ig = information_gain(data.inputs, theta, VALUES_ONLY) - information_gain(X, theta, VALUES_ONLY)
    return check_lemma1(history, theta, batch_size, ig)


def validate_theory(trials=100, seed=0):
    """Run every theory check on ``trials`` random instances; returns ``{name: (passed, total)}``."""
    rng = np.random.default_rng(seed)
    counts = {name: [0, 0] for name in ("proposition1", "theorem1", "dominance", "lemma1")}

    def tally(name, ok):
        counts[name][0] += int(bool(ok))
        counts[name][1] += 1

    for _ in range(trials):
        data, theta, Xtest = random_instance(rng)
        tally("proposition1", check_proposition1(data.inputs, theta).passed)
        tally("theorem1", check_theorem1(data, theta, Xtest)[1])
        dom = check_criterion_dominance(data, theta, Xtest)
        tally("dominance", all(ok for _, _, ok in dom.values()))
    for _ in range(max(1, trials // 5)):
        tally("lemma1", lemma1_run(rng, rounds=int(rng.integers(1, 11)))[2])
    return {k: tuple(v) for k, v in counts.items()}

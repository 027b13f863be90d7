"""Batch active learning for Gaussian process regression with derivative observations."""

from .acquisition import (
    BatchProposal,
    Criterion,
    SearchBox,
    SearchConfig,
    criterion_value,
    optimize_batch,
    optimize_batch_safe,
    pool_select,
)
from .estimator import BatchActiveLearner, GPDerivativeRegressor
from .exceptions import (
    BalgpdError,
    CollinearNeighborhood,
    ConfigError,
    ConvergenceFailure,
    DegenerateData,
    DimensionMismatch,
    EmptyBoxError,
    EmptyFile,
    EmptyHistory,
    HistoryTooShort,
    NoFeasibleStart,
    NotPositiveDefinite,
    ParseError,
    PoolTooSmall,
    TooFewPoints,
)
from .gp import (
    VALUES_ONLY,
    WITH_DERIVATIVES,
    Dataset,
    GpModel,
    OptimizerConfig,
    PredictiveBatch,
    condition,
    fit,
    log_marginal_likelihood,
    predict,
    predict_point_block,
)
from .harness import ExperimentConfig, RunResult, emit_csv, rmse, run_experiment, run_replications
from .kernel import SEHyperparams, assemble_extended_gram, extended_block, se_kernel
from .safety import SafetyModel, fit_safety, update_safety, zeta

__version__ = "0.1.0"

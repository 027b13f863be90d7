import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from balgpd.gp import VALUES_ONLY, Dataset, condition, predict_marginal
from balgpd.kernel import SEHyperparams
from balgpd.safety import SafetyModel, fit_safety, point_zeta, update_safety, zeta

PRIOR_VAR = 1.0 + 1e-2


def far_model(z_max):
    # single observation far away: inside [-3, 3] the safety GP is at its prior (mean 0)
    th = SEHyperparams(1.0, (0.5,), 1e-2)
    return SafetyModel(condition(Dataset([[100.0]], [0.0]), VALUES_ONLY, th), z_max)


def test_median_point_gives_one_half():
    assert zeta(far_model(0.0), [[0.0]]) == pytest.approx(0.5, abs=1e-12)


def test_deep_safe_point():
    assert zeta(far_model(10 * np.sqrt(PRIOR_VAR)), [[0.0]]) >= 1 - 1e-9


def test_batch_is_min_of_points():
    th = SEHyperparams(1.0, (0.5,), 1e-2)
    gp = condition(Dataset([[0.0], [2.0]], [-1.5, 0.4]), VALUES_ONLY, th)
    s = SafetyModel(gp, 0.0)
    per = point_zeta(s, [[0.0], [2.0]])
    assert per[0] > 0.9 and per[1] < 0.4
    assert zeta(s, [[0.0], [2.0]]) == per.min()
    mu, var = predict_marginal(gp, [[2.0]], include_noise=True)
    assert per[1] == pytest.approx(norm.cdf(-mu[0] / np.sqrt(var[0])), rel=1e-12)


def test_zero_variance_rule():
    th = SEHyperparams(1.0, (0.5,), 0.0)
    gp = condition(Dataset([[0.0]], [2.0]), VALUES_ONLY, th)
    assert zeta(SafetyModel(gp, 1.0), [[0.0]]) < 1e-6
    assert zeta(SafetyModel(gp, 3.0), [[0.0]]) > 1 - 1e-6


def test_non_finite_threshold_rejected():
    with pytest.raises(ValueError):
        far_model(np.inf)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_zeta_properties(seed):
    rng = np.random.default_rng(seed)
    th = SEHyperparams(1.0, (rng.uniform(0.3, 2.0),), 1e-2)
    X = rng.uniform(-3, 3, (4, 1))
    gp = condition(Dataset(X, rng.normal(size=4)), VALUES_ONLY, th)
    batch = rng.uniform(-3, 3, (3, 1))
    lo, hi = sorted(rng.normal(size=2))
    z_lo, z_hi = zeta(SafetyModel(gp, lo), batch), zeta(SafetyModel(gp, hi), batch)
    assert 0.0 <= z_lo <= z_hi <= 1.0
    s = SafetyModel(gp, hi)
    # batched and single-row predictions differ only by BLAS rounding
    assert zeta(s, batch) == pytest.approx(min(zeta(s, batch[i : i + 1]) for i in range(3)), rel=1e-9, abs=1e-15)


def _plant_like(seed):
    rng = np.random.default_rng(seed)
    X = np.sort(rng.uniform(0, 4, 8)).reshape(-1, 1)
    z = np.sin(X[:, 0]) + 0.05 * rng.normal(size=8)
    return fit_safety(X, z, 0.8, SEHyperparams(1.0, (1.0,), 1e-2)), X, z


def test_duplicate_append_is_stable():
    s, X, z = _plant_like(0)
    s2 = update_safety(s, X[:1], z[:1])
    held = np.linspace(0.2, 3.8, 15).reshape(-1, 1)
    assert np.max(np.abs(point_zeta(s2, held) - point_zeta(s, held))) <= 0.05
    assert s2.gp.dataset.n == 9


def test_unsafe_append_lowers_zeta():
    s, _, _ = _plant_like(1)
    s2 = update_safety(s, [[6.0]], [5.0])
    assert zeta(s2, [[6.0]]) < 0.5


def test_empty_update_is_noop():
    s, _, _ = _plant_like(2)
    s2 = update_safety(s, np.empty((0, 1)), [])
    assert s2 is s

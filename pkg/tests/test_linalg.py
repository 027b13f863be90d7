import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balgpd.exceptions import DimensionMismatch, NotPositiveDefinite
from balgpd.linalg import (
    CholFactor,
    cholesky_psd,
    is_psd,
    log_det_from_factor,
    solve_with_factor,
    sym_eigenvalues,
    sym_matrix,
)


def random_spd(rng, n, floor=1e-3):
    a = rng.normal(size=(n, n))
    return a @ a.T + floor * np.eye(n)


def test_sym_matrix_averages_and_checks_shape():
    m = sym_matrix([[1.0, 2.0], [4.0, 3.0]])
    assert np.array_equal(m, m.T)
    assert m[0, 1] == 3.0
    with pytest.raises(DimensionMismatch):
        sym_matrix(np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        sym_matrix(np.ones((0, 0)))


def test_cholesky_identity():
    f = cholesky_psd(np.eye(3), 0.0)
    assert np.array_equal(f.lower, np.eye(3))
    assert f.jitter_used == 0.0


def test_cholesky_hand_2x2():
    f = cholesky_psd([[4.0, 2.0], [2.0, 3.0]])
    np.testing.assert_allclose(f.lower, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-15)
    assert f.jitter_used == 0.0


def test_cholesky_indefinite_raises():
    with pytest.raises(NotPositiveDefinite):
        cholesky_psd([[1.0, 2.0], [2.0, 1.0]], 1e-8)


def test_cholesky_uses_smallest_jitter_rung():
    # rank one: fails at jitter 0, succeeds at the first rung
    m = np.ones((3, 3))
    f = cholesky_psd(m, 1e-8)
    assert f.jitter_used == pytest.approx(1e-8)
    rec = f.lower @ f.lower.T
    np.testing.assert_allclose(rec, m + f.jitter_used * np.eye(3), atol=1e-12)
    with pytest.raises(ValueError):
        cholesky_psd(m, -1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_cholesky_reconstruction(n, seed):
    m = random_spd(np.random.default_rng(seed), n)
    f = cholesky_psd(m)
    rec = f.lower @ f.lower.T - f.jitter_used * np.eye(n)
    assert np.linalg.norm(rec - m) <= 1e-10 * np.linalg.norm(m)
    assert np.all(np.diag(f.lower) > 0)
    assert np.array_equal(f.lower, np.tril(f.lower))


def test_solve_identity_and_hand_case():
    b = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(solve_with_factor(CholFactor(np.eye(3)), b), b)
    f = cholesky_psd([[4.0, 2.0], [2.0, 3.0]])
    np.testing.assert_allclose(solve_with_factor(f, np.array([[4.0], [2.0]])), [[1.0], [0.0]], atol=1e-14)
    with pytest.raises(DimensionMismatch):
        solve_with_factor(f, np.ones(3))


def test_solve_round_trip():
    rng = np.random.default_rng(3)
    m = random_spd(rng, 5, floor=0.5)
    b = rng.normal(size=(5, 3))
    x = solve_with_factor(cholesky_psd(m), b)
    assert np.linalg.norm(m @ x - b) <= 1e-8 * np.linalg.norm(b)


@pytest.mark.parametrize(
    "diag, expected", [((1.0, 1.0, 1.0), 0.0), ((2.0, 0.5), 0.0), ((np.e, np.e), 2.0)]
)
def test_log_det_diagonal(diag, expected):
    f = cholesky_psd(np.diag(diag), 0.0)
    assert log_det_from_factor(f) == pytest.approx(expected, abs=1e-14)


def test_log_det_matches_eigenvalues():
    rng = np.random.default_rng(11)
    for n in range(1, 21):
        m = random_spd(rng, n, floor=0.1)
        ld = log_det_from_factor(cholesky_psd(m, 0.0))
        ref = np.sum(np.log(sym_eigenvalues(m)))
        assert ld == pytest.approx(ref, rel=1e-8, abs=1e-8)


def test_eigenvalues_examples():
    np.testing.assert_allclose(sym_eigenvalues(np.diag([3.0, 1.0, 2.0])), [3.0, 2.0, 1.0])
    np.testing.assert_allclose(sym_eigenvalues([[2.0, 1.0], [1.0, 2.0]]), [3.0, 1.0])
    np.testing.assert_allclose(sym_eigenvalues([[-4.5]]), [-4.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_eigenvalues_sum_to_trace(n, seed):
    a = np.random.default_rng(seed).normal(size=(n, n))
    m = sym_matrix(a)
    w = sym_eigenvalues(m)
    assert np.all(np.diff(w) <= 0)
    assert abs(w.sum() - np.trace(m)) <= 1e-9 * n * max(np.abs(m).max(), 1.0)


def test_is_psd_examples():
    assert is_psd(np.zeros((2, 2)), 0.0)
    assert not is_psd(np.diag([1.0, -1e-3]), 1e-8)
    assert is_psd(np.diag([1.0, -1e-9]), 1e-8)
    with pytest.raises(ValueError):
        is_psd(np.eye(2), -1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_is_psd_agrees_with_cholesky_away_from_boundary(n, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = rng.uniform(1e-3, 2.0, n) * rng.choice([-1.0, 1.0], n)
    m = sym_matrix(q @ np.diag(lam) @ q.T)
    try:
        cholesky_psd(m, 0.0)
        factored = True
    except NotPositiveDefinite:
        factored = False
    assert is_psd(m, 0.0) == factored

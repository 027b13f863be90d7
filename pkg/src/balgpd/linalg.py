"""Dense symmetric linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays. ``sym_matrix`` is the single entry point
that turns an arbitrary square array into the symmetric storage the rest of
the code assumes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import ConvergenceFailure, DimensionMismatch, NotPositiveDefinite

__all__ = [
    "CholFactor",
    "sym_matrix",
    "cholesky_psd",
    "solve_with_factor",
    "log_det_from_factor",
    "sym_eigenvalues",
    "is_psd",
]

JITTER_LADDER = (0.0, 1.0, 10.0, 100.0, 1000.0)
_potrf = sla.lapack.dpotrf


def sym_matrix(m):
    """Return ``m`` as a float array symmetrized by averaging with its transpose."""
    m = np.asarray(m, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise DimensionMismatch("matrix must have dimension >= 1")
    out = m + m.T
    out *= 0.5
    return out


@dataclass(frozen=True)
class CholFactor:
    """Lower Cholesky factor of ``m + jitter_used * I``."""

    lower: np.ndarray
    jitter_used: float = 0.0

    @property
    def dim(self):
        return self.lower.shape[0]


def cholesky_psd(m, base_jitter=1e-8):
    """Cholesky factorization with a jitter escalation ladder.

    Tries the jitters ``0, j, 10j, 100j, 1000j`` in order, where
    ``j = base_jitter * mean(diag(m))``, and returns the first success.

    Raises
    ------
    NotPositiveDefinite
        If every rung of the ladder fails.
    """
    if base_jitter < 0:
        raise ValueError("base_jitter must be non-negative")
    m = sym_matrix(m)
    scale = base_jitter * float(np.trace(m)) / m.shape[0]
    largest = 0.0
    for mult in JITTER_LADDER:
        jitter = mult * scale
        if (mult > 0 and not jitter > 0) or not np.isfinite(jitter):
            continue
        a = m
        if jitter:
            a = m.copy()
            a[np.diag_indices_from(a)] += jitter
        largest = jitter
        lower, info = _potrf(a, lower=1, clean=1)
        if info == 0 and np.isfinite(lower).all():
            return CholFactor(lower, jitter)
    raise NotPositiveDefinite(
        f"matrix of dimension {m.shape[0]} is not positive definite (largest jitter tried: {largest:g})"
    )


def solve_with_factor(f, b):
    """Solve ``(L L^T) X = b`` given the factor ``f``."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.dim:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factor has dimension {f.dim}")
    return sla.cho_solve((f.lower, True), b, check_finite=False)


def log_det_from_factor(f):
    return 2.0 * float(np.sum(np.log(np.diag(f.lower))))


def sym_eigenvalues(m):
    """Full real spectrum of a symmetric matrix, largest first."""
    m = sym_matrix(m)
    try:
        w = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return w[::-1]


def is_psd(m, tol=0.0):
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return bool(sym_eigenvalues(m)[-1] >= -tol)

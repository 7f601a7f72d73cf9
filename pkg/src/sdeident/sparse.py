"""Solvers for the assembled square systems.

solve_dense is an LU solve with partial pivoting plus a factorization-
based condition estimate; stls iterates solve-and-threshold to drive
small coefficients to exact zeros.  Thresholding restricts both the rows
and columns of A to the surviving support (the system stays square) and
the corresponding rows of the right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from .estimators import LinearSystem

#: condition estimates beyond this raise instead of returning garbage
CONDITION_LIMIT = 1e12

#: default cap on solve-and-threshold rounds
DEFAULT_MAX_ITER = 20


class SingularSystemError(RuntimeError):
    """Coefficient matrix is singular or numerically indistinguishable from it."""


@dataclass(frozen=True, eq=False)
class SparseSolution:
    """Result of stls: dense coefficient vector with exact zeros off support."""

    coeffs: np.ndarray
    support: tuple[int, ...]
    iterations: int
    converged: bool


def _solve_with_guard(A: np.ndarray, rhs: np.ndarray, label: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    anorm = np.linalg.norm(A, 1)
    try:
        lu, piv = lu_factor(A)
    except ValueError as exc:  # non-finite entries
        raise SingularSystemError(f"system for {label}: {exc}") from exc
    gecon = get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm)
    if info != 0:
        raise SingularSystemError(f"system for {label}: condition estimate failed")
    cond = np.inf if rcond == 0.0 else 1.0 / rcond
    if cond > CONDITION_LIMIT:
        raise SingularSystemError(
            f"system for {label} is numerically singular: condition estimate "
            f"{cond:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )
    return lu_solve((lu, piv), rhs)


def solve_dense(system: LinearSystem, rhs_index: int) -> np.ndarray:
    """Solve A c = B[:, rhs_index] for one target column."""
    label = system.target_labels[rhs_index]
    return _solve_with_guard(system.A, system.B[:, rhs_index], label)


def stls(
    system: LinearSystem,
    rhs_index: int,
    threshold: float,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SparseSolution:
    """Sequentially thresholded solve of A c = B[:, rhs_index].

    Each round solves the system restricted to the current support, then
    drops every coefficient with magnitude below threshold.  Stops when
    the support stops changing (converged) or after max_iter rounds.
    threshold = 0 reproduces solve_dense in one round.  A fully emptied
    support is a legitimate all-zero answer, not an error.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    label = system.target_labels[rhs_index]
    k = system.A.shape[0]
    b = system.B[:, rhs_index]
    support = np.arange(k)
    coeffs = np.zeros(k)
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        sub = _solve_with_guard(
            system.A[np.ix_(support, support)], b[support], label
        )
        keep = np.abs(sub) >= threshold
        coeffs = np.zeros(k)
        coeffs[support[keep]] = sub[keep]
        new_support = support[keep]
        if new_support.size == support.size:
            converged = True
            support = new_support
            break
        support = new_support
        if support.size == 0:
            converged = True
            break
    return SparseSolution(
        coeffs=coeffs,
        support=tuple(int(i) for i in support),
        iterations=iterations,
        converged=converged,
    )

"""Candidate-function dictionaries and delayed design matrices.

A dictionary is an ordered family of scalar functions of the state.  For
a sampled trajectory the design set collects, for each delay n, the
matrix whose row m evaluates the dictionary at sample m + n, together
with the componentwise difference vectors between samples m + n and m.
All matrices share one row count so estimators combine aligned rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .basis import MONOMIAL, TRIG, TermBasis, full_basis
from .simulate import Trajectory


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Ordered candidate functions with printable labels."""

    basis: TermBasis
    labels: tuple[str, ...]

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def size(self) -> int:
        return self.basis.size

    @property
    def family(self) -> str:
        return self.basis.family

    @property
    def funcs(self) -> tuple[Callable[[np.ndarray], float], ...]:
        """One scalar callable per term (convenience; batch work uses evaluate)."""

        def term_fn(idx):
            def f(x):
                return float(self.basis.evaluate(x)[0, idx])

            return f

        return tuple(term_fn(i) for i in range(self.size))

    def evaluate(self, states) -> np.ndarray:
        """(n, dim) states -> (n, size) matrix of term values."""
        return self.basis.evaluate(states)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"label {label!r} not in dictionary") from None


def _from_basis(basis: TermBasis) -> Dictionary:
    return Dictionary(basis=basis, labels=basis.labels())


def monomial_dictionary(dim: int, max_degree: int) -> Dictionary:
    """All monomials of total degree <= max_degree, graded-lex, constant first."""
    return _from_basis(full_basis(MONOMIAL, dim, max_degree))


def trig_monomial_dictionary(dim: int, max_degree: int) -> Dictionary:
    """Monomials in sin(x_1), ..., sin(x_d) of total degree <= max_degree."""
    return _from_basis(full_basis(TRIG, dim, max_degree))


@dataclass(frozen=True, eq=False)
class DesignSet:
    """Delayed design matrices and difference vectors over aligned rows.

    theta[n][m] evaluates the dictionary at sample m + n; diffs[(i, n)][m]
    is component i of sample m + n minus sample m.  rows is the shared
    row count, dt the sampling interval of the underlying trajectory.
    """

    theta: Mapping[int, np.ndarray]
    diffs: Mapping[tuple[int, int], np.ndarray]
    rows: int
    dt: float
    dim: int
    labels: tuple[str, ...]
    max_delay: int


def build_design_set(
    dictionary: Dictionary, traj: Trajectory, max_delay: int
) -> DesignSet:
    """Evaluate the dictionary once and expose delays as row-shifted views."""
    if max_delay < 1:
        raise ValueError(f"max_delay must be >= 1, got {max_delay}")
    if dictionary.dim != traj.dim:
        raise ValueError(
            f"dictionary dimension {dictionary.dim} != trajectory dimension {traj.dim}"
        )
    rows = traj.n_samples - max_delay
    if rows < 1:
        raise ValueError(
            f"trajectory with {traj.n_samples} samples is too short for "
            f"max_delay={max_delay}"
        )
    full = dictionary.evaluate(traj.states)
    full.flags.writeable = False
    theta = {n: full[n: n + rows] for n in range(max_delay + 1)}
    states = traj.states
    diffs = {}
    for i in range(traj.dim):
        for n in range(1, max_delay + 1):
            d = states[n: n + rows, i] - states[:rows, i]
            d.flags.writeable = False
            diffs[(i, n)] = d
    return DesignSet(
        theta=theta,
        diffs=diffs,
        rows=rows,
        dt=traj.dt,
        dim=traj.dim,
        labels=dictionary.labels,
        max_delay=max_delay,
    )


def truncate_design(ds: DesignSet, rows: int) -> DesignSet:
    """Restrict a design set to its first rows rows (views, no copies)."""
    if not 1 <= rows <= ds.rows:
        raise ValueError(f"rows must be in [1, {ds.rows}], got {rows}")
    return DesignSet(
        theta={n: m[:rows] for n, m in ds.theta.items()},
        diffs={k: v[:rows] for k, v in ds.diffs.items()},
        rows=rows,
        dt=ds.dt,
        dim=ds.dim,
        labels=ds.labels,
        max_delay=ds.max_delay,
    )

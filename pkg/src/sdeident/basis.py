"""Product-term bases: monomials x1^e1*...*xd^ed and their sin() counterparts.

A term basis is an ordered list of exponent vectors over the state
components.  Both dictionary construction and the built-in model tables
share this machinery, so labels and term ordering are consistent
everywhere: graded-lexicographic, constant term first.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

MONOMIAL = "monomial"
TRIG = "trig"
FAMILIES = (MONOMIAL, TRIG)

# Refuse to enumerate bases beyond this many terms; anything larger is a
# config mistake, not a workload.
MAX_TERMS = 10**6


class BasisSizeError(ValueError):
    """Requested basis would have an unreasonable number of terms."""


def basis_size(dim: int, max_degree: int) -> int:
    """Number of product terms of total degree <= max_degree in dim variables."""
    return math.comb(dim + max_degree, dim)


def grlex_exponents(dim: int, max_degree: int) -> np.ndarray:
    """Exponent rows in graded-lex order (degree, then leading variable first).

    For dim=2, max_degree=2 the rows are 1, x1, x2, x1^2, x1*x2, x2^2.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if max_degree < 0:
        raise ValueError(f"max_degree must be >= 0, got {max_degree}")
    k = basis_size(dim, max_degree)
    if k > MAX_TERMS:
        raise BasisSizeError(
            f"basis with dim={dim}, max_degree={max_degree} has {k} terms "
            f"(limit {MAX_TERMS})"
        )
    rows = np.zeros((k, dim), dtype=np.int64)
    r = 0
    for degree in range(max_degree + 1):
        for combo in combinations_with_replacement(range(dim), degree):
            for j in combo:
                rows[r, j] += 1
            r += 1
    return rows


def _var_name(j: int, family: str) -> str:
    return f"sin(x{j + 1})" if family == TRIG else f"x{j + 1}"


def term_label(exponents, family: str) -> str:
    """Human-readable label for one exponent row, e.g. ``x1^2*x3`` or ``sin(x2)``."""
    parts = []
    for j, e in enumerate(exponents):
        if e == 0:
            continue
        name = _var_name(j, family)
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts) if parts else "1"


_PART_RE = re.compile(r"^(?:sin\(x(\d+)\)|x(\d+))(?:\^(\d+))?$")


def parse_label(label: str, dim: int, family: str) -> tuple[int, ...]:
    """Inverse of :func:`term_label`; used to read coefficient tables."""
    label = label.strip()
    exps = [0] * dim
    if label == "1":
        return tuple(exps)
    for part in label.split("*"):
        m = _PART_RE.match(part.strip())
        if m is None:
            raise ValueError(f"cannot parse term {part!r} in label {label!r}")
        trig_idx, plain_idx, power = m.groups()
        if (trig_idx is not None) != (family == TRIG):
            raise ValueError(
                f"term {part!r} does not belong to the {family!r} family"
            )
        j = int(trig_idx if trig_idx is not None else plain_idx) - 1
        if not 0 <= j < dim:
            raise ValueError(f"variable index out of range in {part!r} (dim={dim})")
        exps[j] += int(power) if power else 1
    return tuple(exps)


@dataclass(frozen=True, eq=False)
class TermBasis:
    """Ordered exponent table over either x_j or sin(x_j) variables."""

    family: str
    exponents: np.ndarray  # (k, dim) int64

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        e = np.ascontiguousarray(np.asarray(self.exponents, dtype=np.int64))
        e.flags.writeable = False
        object.__setattr__(self, "exponents", e)

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    @property
    def dim(self) -> int:
        return self.exponents.shape[1]

    def labels(self) -> tuple[str, ...]:
        return tuple(term_label(row, self.family) for row in self.exponents)

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        """Evaluate every term at every state; (n, dim) -> (n, k).

        Powers of each variable are precomputed once, so the cost is one
        multiply per (state, term, active variable).
        """
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.dim:
            raise ValueError(
                f"states have dimension {states.shape[1]}, basis expects {self.dim}"
            )
        base = np.sin(states) if self.family == TRIG else states
        n = states.shape[0]
        out = np.ones((n, self.size), dtype=float)
        max_pow = self.exponents.max(axis=0)
        powers = []
        for j in range(self.dim):
            pj = np.ones((n, max_pow[j] + 1), dtype=float)
            for e in range(1, max_pow[j] + 1):
                pj[:, e] = pj[:, e - 1] * base[:, j]
            powers.append(pj)
        for l, row in enumerate(self.exponents):
            for j, e in enumerate(row):
                if e:
                    out[:, l] *= powers[j][:, e]
        return out


def full_basis(family: str, dim: int, max_degree: int) -> TermBasis:
    """All terms of total degree <= max_degree, graded-lex order."""
    return TermBasis(family, grlex_exponents(dim, max_degree))

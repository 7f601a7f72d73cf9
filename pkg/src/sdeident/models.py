"""SDE models: dX_t = mu(X_t) dt + sigma(X_t) dW_t.

Models carry plain callables for mu and sigma plus, when the functions
are linear combinations of basis terms, coefficient tables.  The tables
feed the compiled simulation kernel and the exact-truth expansions; the
callables cover everything else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .basis import MONOMIAL, TRIG, TermBasis, full_basis, parse_label


@dataclass(frozen=True, eq=False)
class DriftTable:
    """mu_i(x) = sum_l coeffs[l, i] * term_l(x)."""

    basis: TermBasis
    coeffs: np.ndarray  # (k, dim)

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=float))
        if c.shape != (self.basis.size, self.basis.dim):
            raise ValueError(f"drift coefficient table has shape {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True, eq=False)
class SigmaTable:
    """sigma_ij(x) = sum_l coeffs[l, i, j] * term_l(x)."""

    basis: TermBasis
    coeffs: np.ndarray  # (k, dim, dim)

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=float))
        d = self.basis.dim
        if c.shape != (self.basis.size, d, d):
            raise ValueError(f"sigma coefficient table has shape {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True, eq=False)
class SdeModel:
    """A d-dimensional Ito SDE given by drift and diffusion functions.

    drift maps a d-vector to a d-vector, diffusion maps a d-vector to a
    (d, d) matrix.  labels name the state components.  drift_table and
    sigma_table are present for models expressible as coefficient tables
    over a term basis and enable the compiled simulation path.
    """

    dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    labels: tuple[str, ...]
    name: str = ""
    drift_table: DriftTable | None = None
    sigma_table: SigmaTable | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if len(self.labels) != self.dim:
            raise ValueError("one label per state component required")


def true_sigma_matrix(model: SdeModel, x) -> np.ndarray:
    """Diffusion matrix that estimation targets: 0.5 * sigma(x) sigma(x)^T."""
    s = np.asarray(model.diffusion(np.asarray(x, dtype=float)), dtype=float)
    return 0.5 * (s @ s.T)


def _drift_from_table(table: DriftTable) -> Callable[[np.ndarray], np.ndarray]:
    def drift(x):
        terms = table.basis.evaluate(x)[0]
        return terms @ table.coeffs

    return drift


def _diffusion_from_table(table: SigmaTable) -> Callable[[np.ndarray], np.ndarray]:
    def diffusion(x):
        terms = table.basis.evaluate(x)[0]
        return np.tensordot(terms, table.coeffs, axes=1)

    return diffusion


def build_table_model(
    dim: int,
    drift: Sequence[Mapping[str, float]],
    sigma: Mapping[tuple[int, int], Mapping[str, float]],
    drift_family: str = MONOMIAL,
    sigma_family: str = MONOMIAL,
    name: str = "",
) -> SdeModel:
    """Assemble an SdeModel from label->coefficient mappings.

    drift is one mapping per component; sigma maps 0-based (row, col)
    entries.  Labels follow the basis conventions ("1", "x1^2*x3",
    "sin(x2)").  The enclosing basis is the full graded-lex basis of the
    smallest degree containing every used term.
    """
    if len(drift) != dim:
        raise ValueError(f"need {dim} drift component tables, got {len(drift)}")

    def as_exponents(mapping, family):
        return {
            parse_label(lbl, dim, family): float(c) for lbl, c in mapping.items()
        }

    drift_maps = [as_exponents(m, drift_family) for m in drift]
    sigma_maps = {}
    for (i, j), m in sigma.items():
        if not (0 <= i < dim and 0 <= j < dim):
            raise ValueError(f"sigma entry ({i}, {j}) out of range for dim={dim}")
        sigma_maps[(i, j)] = as_exponents(m, sigma_family)

    def degree_of(maps):
        degs = [sum(e) for m in maps for e in m]
        return max(degs, default=0)

    drift_basis = full_basis(drift_family, dim, degree_of(drift_maps))
    sigma_basis = full_basis(sigma_family, dim, degree_of(list(sigma_maps.values())))

    def index_of(basis):
        return {tuple(row): l for l, row in enumerate(basis.exponents)}

    didx, sidx = index_of(drift_basis), index_of(sigma_basis)
    dcoef = np.zeros((drift_basis.size, dim))
    for i, m in enumerate(drift_maps):
        for e, c in m.items():
            dcoef[didx[e], i] = c
    scoef = np.zeros((sigma_basis.size, dim, dim))
    for (i, j), m in sigma_maps.items():
        for e, c in m.items():
            scoef[sidx[e], i, j] = c

    dtab = DriftTable(drift_basis, dcoef)
    stab = SigmaTable(sigma_basis, scoef)
    return SdeModel(
        dim=dim,
        drift=_drift_from_table(dtab),
        diffusion=_diffusion_from_table(stab),
        labels=tuple(f"x{i + 1}" for i in range(dim)),
        name=name,
        drift_table=dtab,
        sigma_table=stab,
    )


# ============================================================
# Built-in models
# ============================================================

def _double_well() -> SdeModel:
    # Scalar bistable drift with quadratic multiplicative noise.
    return build_table_model(
        dim=1,
        drift=[{"x1": 0.5, "x1^3": -1.0}],
        sigma={(0, 0): {"1": 1.0, "x1^2": 0.25}},
        name="double_well",
    )


def _van_der_pol() -> SdeModel:
    # Stochastic Van der Pol oscillator, diagonal state-dependent noise.
    return build_table_model(
        dim=2,
        drift=[
            {"x2": 1.0},
            {"x1": -1.0, "x2": 1.0, "x1^2*x2": -1.0},
        ],
        sigma={
            (0, 0): {"1": 0.5, "x2": 0.15},
            (1, 1): {"1": 0.25, "x1": 0.1},
        },
        name="van_der_pol",
    )


def _lorenz() -> SdeModel:
    # Stochastic Lorenz system; bounded trigonometric noise with
    # off-diagonal coupling between the first and third components.
    return build_table_model(
        dim=3,
        drift=[
            {"x1": -10.0, "x2": 10.0},
            {"x1": 28.0, "x2": -1.0, "x1*x3": -1.0},
            {"x1*x2": 1.0, "x3": -8.0 / 3.0},
        ],
        sigma={
            (0, 0): {"1": 1.0, "sin(x2)": 1.0},
            (0, 2): {"sin(x1)": 1.0},
            (1, 1): {"1": 1.0, "sin(x3)": 1.0},
            (2, 0): {"sin(x1)": 1.0},
            (2, 2): {"1": 1.0, "sin(x2)": -1.0},
        },
        sigma_family=TRIG,
        name="lorenz",
    )


_ZOO = {
    "double_well": _double_well,
    "van_der_pol": _van_der_pol,
    "lorenz": _lorenz,
}

ZOO_NAMES = tuple(_ZOO)


def model_zoo(name: str) -> SdeModel:
    """Return a built-in model by name; see ZOO_NAMES for the choices."""
    try:
        factory = _ZOO[name]
    except KeyError:
        raise KeyError(
            f"unknown model {name!r}; available: {', '.join(ZOO_NAMES)}"
        ) from None
    return factory()

"""Ensemble error metrics and exact reference coefficients.

The relative error of the ensemble mean and the relative ensemble
variance are normalized by the squared norm of the true coefficients,
summed over target columns (drift components, or diffusion pairs i >= j).
Variance is the population mean of squared deviations from the ensemble
mean - not the n-1 sample estimator - matching its role as an empirical
expectation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import term_label
from .dictionary import Dictionary
from .estimators import sigma_pairs
from .models import SdeModel, model_zoo


class NotRepresentableError(ValueError):
    """The model's exact coefficients do not lie in the dictionary span."""


@dataclass(frozen=True, eq=False)
class TrialEnsemble:
    """Per-trial coefficient estimates for one (method, dt, T) cell."""

    estimates: tuple[np.ndarray, ...]  # each (k, m)
    truth: np.ndarray  # (k, m)
    method: str
    dt: float
    T: float
    diverged: int = 0


@dataclass(frozen=True)
class ErrorReport:
    method: str
    target: str
    dt: float
    T: float
    trials: int
    diverged: int
    err_mean: float
    err_var: float


def aggregate(ens: TrialEnsemble, target: str | None = None) -> ErrorReport:
    """Collapse an ensemble into relative mean-error and variance numbers."""
    if len(ens.estimates) < 1:
        raise ValueError("ensemble contains no estimates")
    truth = np.asarray(ens.truth, dtype=float)
    tn2 = float(np.sum(truth * truth))
    if tn2 == 0.0:
        raise ValueError("truth coefficients are all zero; relative error undefined")
    stack = np.stack([np.asarray(e, dtype=float) for e in ens.estimates])
    if stack.shape[1:] != truth.shape:
        raise ValueError(
            f"estimate shape {stack.shape[1:]} does not match truth {truth.shape}"
        )
    mean = stack.mean(axis=0)
    err_mean = float(np.sqrt(np.sum((mean - truth) ** 2) / tn2))
    dev = stack - mean
    err_var = float(np.sum(dev * dev) / stack.shape[0] / tn2)
    if target is None:
        target = "drift" if ens.method.startswith("drift") else "diffusion"
    return ErrorReport(
        method=ens.method,
        target=target,
        dt=ens.dt,
        T=ens.T,
        trials=len(ens.estimates),
        diverged=ens.diverged,
        err_mean=err_mean,
        err_var=err_var,
    )


def fit_order(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(err) against log(dt) - the empirical order."""
    if len(points) < 2:
        raise ValueError("need at least two (dt, err) points to fit an order")
    dts = np.array([p[0] for p in points], dtype=float)
    errs = np.array([p[1] for p in points], dtype=float)
    if np.any(dts <= 0) or np.any(errs <= 0):
        raise ValueError("dt and err values must be positive for a log-log fit")
    slope, _ = np.polyfit(np.log(dts), np.log(errs), 1)
    return float(slope)


# ============================================================
# Exact coefficients of the built-in models
# ============================================================

def _as_model(model: SdeModel | str) -> SdeModel:
    return model_zoo(model) if isinstance(model, str) else model


def _exponent_index(dictionary: Dictionary) -> dict[tuple[int, ...], int]:
    return {tuple(r): i for i, r in enumerate(dictionary.basis.exponents)}


def _place(
    terms: dict[tuple[int, ...], float],
    dictionary: Dictionary,
    index: dict[tuple[int, ...], int],
    what: str,
) -> np.ndarray:
    col = np.zeros(dictionary.size)
    for expo, c in terms.items():
        if c == 0.0:
            continue
        if expo not in index:
            raise NotRepresentableError(
                f"{what} needs term {term_label(expo, dictionary.family)!r} "
                "which is not in the dictionary"
            )
        col[index[expo]] = c
    return col


def true_drift_coefficients(
    model: SdeModel | str, dictionary: Dictionary
) -> np.ndarray:
    """Exact drift expansion, (k, dim); errors if not representable."""
    model = _as_model(model)
    table = model.drift_table
    if table is None:
        raise NotRepresentableError(
            f"model {model.name or '<anonymous>'} has no drift coefficient table"
        )
    if table.basis.family != dictionary.family:
        raise NotRepresentableError(
            f"drift terms are {table.basis.family}, dictionary is {dictionary.family}"
        )
    index = _exponent_index(dictionary)
    out = np.zeros((dictionary.size, model.dim))
    for i in range(model.dim):
        terms = {
            tuple(expo): float(c)
            for expo, c in zip(table.basis.exponents, table.coeffs[:, i])
        }
        out[:, i] = _place(terms, dictionary, index, f"drift component {i + 1}")
    return out


def true_diffusion_coefficients(
    model: SdeModel | str, dictionary: Dictionary
) -> np.ndarray:
    """Exact expansion of 0.5*sigma*sigma^T, (k, n_pairs) over pairs i >= j.

    Products of sigma-table terms are again basis terms (exponents add),
    so the expansion is computed exactly from the tables.
    """
    model = _as_model(model)
    table = model.sigma_table
    if table is None:
        raise NotRepresentableError(
            f"model {model.name or '<anonymous>'} has no sigma coefficient table"
        )
    if table.basis.family != dictionary.family:
        raise NotRepresentableError(
            f"sigma terms are {table.basis.family}, dictionary is {dictionary.family}"
        )
    index = _exponent_index(dictionary)
    pairs = sigma_pairs(model.dim)
    expo_rows = [tuple(r) for r in table.basis.exponents]
    coeffs = table.coeffs
    out = np.zeros((dictionary.size, len(pairs)))
    for c, (i, j) in enumerate(pairs):
        terms: dict[tuple[int, ...], float] = {}
        # (0.5 * sigma sigma^T)_ij = 0.5 * sum_m sigma_im sigma_jm
        for m in range(model.dim):
            for l1, e1 in enumerate(expo_rows):
                c1 = coeffs[l1, i, m]
                if c1 == 0.0:
                    continue
                for l2, e2 in enumerate(expo_rows):
                    c2 = coeffs[l2, j, m]
                    if c2 == 0.0:
                        continue
                    key = tuple(a + b for a, b in zip(e1, e2))
                    terms[key] = terms.get(key, 0.0) + 0.5 * c1 * c2
        out[:, c] = _place(terms, dictionary, index, f"Sigma_{i + 1}{j + 1}")
    return out


def true_coefficients(
    model: SdeModel | str, dictionary: Dictionary
) -> tuple[np.ndarray, np.ndarray]:
    """Exact (drift, diffusion) coefficient matrices in one dictionary."""
    return (
        true_drift_coefficients(model, dictionary),
        true_diffusion_coefficients(model, dictionary),
    )

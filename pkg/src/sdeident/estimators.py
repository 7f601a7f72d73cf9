"""Normal-equation assembly for drift and diffusion identification.

Writing Theta_n for the dictionary evaluated at delay n and D^i_n for the
span-n differences of component i, every estimator here produces a square
system A c = b per target with

    A = Theta_0^T M          (M built from delayed design matrices)
    b = Theta_0^T r          (r built from difference vectors)

The left factor is always Theta_0 - the dictionary evaluated at the row's
*initial* sample.  Projecting onto functions of the earlier state is what
keeps the stochastic integrals Ito ones; using a later-delay dictionary on
the left instead biases drift estimates toward the Stratonovich reading
(see the central-difference property test).  A is therefore generally not
symmetric, and the systems are solved, never least-squared.

Drift estimators regress single-step (or multi-step) difference quotients;
diffusion estimators regress products of difference pairs, targeting the
matrix 0.5 * sigma sigma^T row-by-row over the pairs i >= j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dictionary import DesignSet

DRIFT_FD1 = "drift_fd1"
DRIFT_FD2 = "drift_fd2"
DRIFT_TRAP = "drift_trap"
DRIFT_GENERAL = "drift_general"
DIFF_FD1 = "diff_fd1"
DIFF_DRIFT_SUB = "diff_drift_sub"
DIFF_FD2 = "diff_fd2"
DIFF_TRAP = "diff_trap"

DRIFT_KINDS = (DRIFT_FD1, DRIFT_FD2, DRIFT_TRAP, DRIFT_GENERAL)
DIFFUSION_KINDS = (DIFF_FD1, DIFF_DRIFT_SUB, DIFF_FD2, DIFF_TRAP)
METHOD_KINDS = DRIFT_KINDS + DIFFUSION_KINDS


@dataclass(frozen=True)
class MethodSpec:
    """An estimation method: a kind plus, for drift_general, the scheme weights.

    lmm_a weights the delayed design matrices Theta_0..Theta_p on the
    left-hand side; lmm_b weights the difference vectors D_1..D_q on the
    right.  Both are required exactly when kind == "drift_general".
    """

    kind: str
    lmm_a: tuple[float, ...] | None = None
    lmm_b: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError(
                f"unknown method kind {self.kind!r}; choices: {METHOD_KINDS}"
            )
        has = self.lmm_a is not None or self.lmm_b is not None
        if self.kind == DRIFT_GENERAL:
            if self.lmm_a is None or self.lmm_b is None:
                raise ValueError("drift_general requires lmm_a and lmm_b weights")
            object.__setattr__(self, "lmm_a", tuple(float(a) for a in self.lmm_a))
            object.__setattr__(self, "lmm_b", tuple(float(b) for b in self.lmm_b))
            if not any(a != 0.0 for a in self.lmm_a):
                raise ValueError("lmm_a must contain a nonzero weight")
            if len(self.lmm_b) < 1:
                raise ValueError("lmm_b must contain at least one weight")
        elif has:
            raise ValueError(f"{self.kind} does not take lmm weights")

    @property
    def target(self) -> str:
        return "drift" if self.kind in DRIFT_KINDS else "diffusion"

    def required_delay(self) -> int:
        if self.kind == DRIFT_GENERAL:
            return max(len(self.lmm_a) - 1, len(self.lmm_b))
        return 2 if self.kind in (DRIFT_FD2, DIFF_FD2) else 1


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Square system A @ c = B[:, t] per target column t."""

    A: np.ndarray  # (k, k)
    B: np.ndarray  # (k, m)
    target_labels: tuple[str, ...]


def sigma_pairs(dim: int) -> tuple[tuple[int, int], ...]:
    """Component pairs (i, j), i >= j, in fixed (1,1),(2,1),(2,2),... order."""
    return tuple((i, j) for i in range(dim) for j in range(i + 1))


def _check_delay(ds: DesignSet, needed: int, kind: str):
    if needed > ds.max_delay:
        raise ValueError(
            f"{kind} needs delay {needed} but the design set has "
            f"max_delay={ds.max_delay}"
        )


def _drift_labels(dim: int) -> tuple[str, ...]:
    return tuple(f"mu_{i + 1}" for i in range(dim))


def _sigma_labels(dim: int) -> tuple[str, ...]:
    return tuple(f"Sigma_{i + 1}{j + 1}" for i, j in sigma_pairs(dim))


def _general_drift_system(
    ds: DesignSet, a: Sequence[float], b: Sequence[float]
) -> LinearSystem:
    """Shared assembly: A = Theta_0^T sum_l a_l Theta_l, b_i = sum_l b_l Theta_0^T D^i_l.

    The named schemes call this with their weights, so the general form
    specializes to them bit-for-bit.
    """
    theta0 = ds.theta[0]
    M = None
    for l, al in enumerate(a):
        if al == 0.0:
            continue
        # multiplying by exactly 1.0 is a bitwise no-op; skip the copy
        contrib = ds.theta[l] if al == 1.0 else al * ds.theta[l]
        M = contrib if M is None else M + contrib
    A = theta0.T @ M
    k = theta0.shape[1]
    B = np.zeros((k, ds.dim))
    for i in range(ds.dim):
        col = None
        for l, bl in enumerate(b, start=1):
            if bl == 0.0:
                continue
            proj = theta0.T @ ds.diffs[(i, l)]
            contrib = proj if bl == 1.0 else bl * proj
            col = contrib if col is None else col + contrib
        B[:, i] = 0.0 if col is None else col
    return LinearSystem(A=A, B=B, target_labels=_drift_labels(ds.dim))


def drift_fd1(ds: DesignSet) -> LinearSystem:
    """First-order forward differences: A = Theta_0^T Theta_0, b_i = Theta_0^T D^i_1 / dt."""
    _check_delay(ds, 1, DRIFT_FD1)
    return _general_drift_system(ds, (1.0,), (1.0 / ds.dt,))


def drift_fd2(ds: DesignSet) -> LinearSystem:
    """Second-order forward differences: b_i = Theta_0^T (4 D^i_1 - D^i_2) / (2 dt)."""
    _check_delay(ds, 2, DRIFT_FD2)
    return _general_drift_system(
        ds, (1.0, 0.0, 0.0), (2.0 / ds.dt, -1.0 / (2.0 * ds.dt))
    )


def drift_trapezoidal(ds: DesignSet) -> LinearSystem:
    """Trapezoidal scheme: A = Theta_0^T (Theta_0 + Theta_1) / 2, b_i = Theta_0^T D^i_1 / dt.

    Only the left-hand side averages the two endpoints; the projection
    stays on Theta_0.
    """
    _check_delay(ds, 1, DRIFT_TRAP)
    return _general_drift_system(ds, (0.5, 0.5), (1.0 / ds.dt,))


def drift_general(ds: DesignSet, spec: MethodSpec) -> LinearSystem:
    """Arbitrary linear-multistep weights over delayed designs and differences."""
    if spec.kind != DRIFT_GENERAL:
        raise ValueError(f"expected a drift_general spec, got kind {spec.kind!r}")
    _check_delay(ds, spec.required_delay(), DRIFT_GENERAL)
    return _general_drift_system(ds, spec.lmm_a, spec.lmm_b)


# ============================================================
# Diffusion systems
# ============================================================

def _pair_products(ds: DesignSet, resid: list[np.ndarray]) -> np.ndarray:
    """Stack columnwise Hadamard products resid_i * resid_j for pairs i >= j."""
    pairs = sigma_pairs(ds.dim)
    H = np.empty((ds.rows, len(pairs)))
    for c, (i, j) in enumerate(pairs):
        H[:, c] = resid[i] * resid[j]
    return H


def _drift_fit(ds: DesignSet, alpha: np.ndarray, drift_design: DesignSet | None,
               trapezoidal: bool) -> np.ndarray:
    """Per-row drift values Theta alpha, optionally from a separate dictionary.

    Passing drift_design evaluates the fitted drift with the design set it
    was estimated in; the rows line up because both sets come from the
    same trajectory and share max_delay.  The trapezoidal variant averages
    the delay-0 and delay-1 evaluations.
    """
    dd = ds if drift_design is None else drift_design
    if drift_design is not None and drift_design.rows != ds.rows:
        raise ValueError(
            f"drift design has {drift_design.rows} rows, diffusion design has {ds.rows}"
        )
    alpha = np.asarray(alpha, dtype=float)
    k = dd.theta[0].shape[1]
    if alpha.shape != (k, ds.dim):
        raise ValueError(
            f"alpha has shape {alpha.shape}, expected ({k}, {ds.dim})"
        )
    theta = dd.theta[0] + dd.theta[1] if trapezoidal else dd.theta[0]
    return theta @ alpha


def diffusion_fd1(ds: DesignSet) -> LinearSystem:
    """First-order estimator of 0.5*sigma*sigma^T from raw difference products.

    b_(i,j) = Theta_0^T (D^i_1 * D^j_1) / (2 dt); biased by the finite-dt
    drift contribution mu_i mu_j dt.
    """
    _check_delay(ds, 1, DIFF_FD1)
    theta0 = ds.theta[0]
    A = theta0.T @ theta0
    resid = [ds.diffs[(i, 1)] for i in range(ds.dim)]
    B = (1.0 / (2.0 * ds.dt)) * (theta0.T @ _pair_products(ds, resid))
    return LinearSystem(A=A, B=B, target_labels=_sigma_labels(ds.dim))


def diffusion_drift_sub(
    ds: DesignSet, alpha: np.ndarray, drift_design: DesignSet | None = None
) -> LinearSystem:
    """Like diffusion_fd1 but with the fitted drift increment removed first.

    Each difference is replaced by D^i_1 - dt * (Theta alpha)_i before the
    products are formed, cancelling the mu_i mu_j dt bias up to the drift
    fit error.  alpha is a previously computed drift estimate; give
    drift_design when it lives in a different dictionary.
    """
    _check_delay(ds, 1, DIFF_DRIFT_SUB)
    fit = _drift_fit(ds, alpha, drift_design, trapezoidal=False)
    theta0 = ds.theta[0]
    A = theta0.T @ theta0
    resid = [ds.diffs[(i, 1)] - ds.dt * fit[:, i] for i in range(ds.dim)]
    B = (1.0 / (2.0 * ds.dt)) * (theta0.T @ _pair_products(ds, resid))
    return LinearSystem(A=A, B=B, target_labels=_sigma_labels(ds.dim))


def diffusion_fd2(ds: DesignSet) -> LinearSystem:
    """Second-order difference products: b_(i,j) = Theta_0^T (4 D^i_1 D^j_1 - D^i_2 D^j_2) / (4 dt)."""
    _check_delay(ds, 2, DIFF_FD2)
    theta0 = ds.theta[0]
    A = theta0.T @ theta0
    r1 = [ds.diffs[(i, 1)] for i in range(ds.dim)]
    r2 = [ds.diffs[(i, 2)] for i in range(ds.dim)]
    H = 4.0 * _pair_products(ds, r1) - _pair_products(ds, r2)
    B = (1.0 / (4.0 * ds.dt)) * (theta0.T @ H)
    return LinearSystem(A=A, B=B, target_labels=_sigma_labels(ds.dim))


def diffusion_trapezoidal(
    ds: DesignSet, alpha: np.ndarray, drift_design: DesignSet | None = None
) -> LinearSystem:
    """Trapezoidal diffusion estimator with drift removal.

    A = Theta_0^T (Theta_0 + Theta_1); the differences are corrected by
    dt/2 times the endpoint-averaged fitted drift, and the products are
    scaled by 1/dt.  alpha should come from the trapezoidal drift
    estimator evaluated on the same data.
    """
    _check_delay(ds, 1, DIFF_TRAP)
    fit = _drift_fit(ds, alpha, drift_design, trapezoidal=True)
    theta0 = ds.theta[0]
    A = theta0.T @ (ds.theta[0] + ds.theta[1])
    resid = [
        ds.diffs[(i, 1)] - (0.5 * ds.dt) * fit[:, i] for i in range(ds.dim)
    ]
    B = (1.0 / ds.dt) * (theta0.T @ _pair_products(ds, resid))
    return LinearSystem(A=A, B=B, target_labels=_sigma_labels(ds.dim))

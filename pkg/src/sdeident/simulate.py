"""Euler-Maruyama simulation and trajectory subsampling.

X_{k+1} = X_k + mu(X_k) dt + sigma(X_k) dW_k with dW_k ~ N(0, dt * I)
drawn componentwise from a seeded generator.  Noise is generated in
fixed-size chunks so long runs stay memory-bounded and both stepping
kernels see the same stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .models import SdeModel

#: components beyond this magnitude terminate the run as divergent
DIVERGENCE_LIMIT = 1e9

_CHUNK = 65536


class DivergenceError(RuntimeError):
    """A simulated state left the admissible region."""

    def __init__(self, step: int, value: float):
        self.step = step
        self.value = value
        super().__init__(
            f"trajectory diverged at step {step} "
            f"(component magnitude {value:.3e} exceeds {DIVERGENCE_LIMIT:.0e} "
            "or is not finite)"
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Equally spaced samples of one realization.

    states has one row per sample; dt is the sampling interval, an exact
    integer multiple of the simulation step sim_dt that generated the
    data; seed reproduces the noise stream.
    """

    states: np.ndarray  # (n, dim)
    dt: float
    seed: int
    sim_dt: float

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        if s.ndim != 2 or s.shape[0] < 2:
            raise ValueError("states must be a 2-d array with at least 2 rows")
        if not (self.dt > 0 and self.sim_dt > 0):
            raise ValueError("dt and sim_dt must be positive")
        ratio = self.dt / self.sim_dt
        if abs(ratio - round(ratio)) > 1e-9 * max(ratio, 1.0):
            raise ValueError(
                f"dt={self.dt} is not an integer multiple of sim_dt={self.sim_dt}"
            )
        s.flags.writeable = False
        object.__setattr__(self, "states", s)

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def _callable_chunk(model, x, sim_dt, sqrt_dt, noise, out):
    """Generic stepping through Python callables; mirrors the kernels."""
    for step in range(noise.shape[0]):
        mu = np.asarray(model.drift(x), dtype=float)
        sig = np.asarray(model.diffusion(x), dtype=float)
        new = x + mu * sim_dt + sig @ (noise[step] * sqrt_dt)
        x[:] = new
        out[step] = new
        if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > DIVERGENCE_LIMIT:
            return step
    return -1


def euler_maruyama(
    model: SdeModel, x0, sim_dt: float, n_steps: int, seed: int
) -> Trajectory:
    """Simulate n_steps Euler-Maruyama steps from x0; returns n_steps + 1 states.

    Identical arguments produce bit-identical trajectories.  Models with
    coefficient tables run on the active stepping kernel; arbitrary
    callables fall back to a per-step Python loop.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if sim_dt <= 0:
        raise ValueError(f"sim_dt must be positive, got {sim_dt}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.dim,):
        raise ValueError(f"x0 has shape {x0.shape}, model dimension is {model.dim}")

    rng = np.random.default_rng(seed)
    sqrt_dt = float(np.sqrt(sim_dt))
    states = np.empty((n_steps + 1, model.dim), dtype=float)
    states[0] = x0
    x = x0.copy()

    tables = None
    if model.drift_table is not None and model.sigma_table is not None:
        dt_, st_ = model.drift_table, model.sigma_table
        tables = (
            dt_.basis.exponents, dt_.coeffs, dt_.basis.family == "trig",
            st_.basis.exponents, st_.coeffs, st_.basis.family == "trig",
        )

    done = 0
    while done < n_steps:
        take = min(_CHUNK, n_steps - done)
        noise = rng.standard_normal((take, model.dim))
        out = states[done + 1: done + 1 + take]
        if tables is not None:
            bad = backend.active.em_chunk(
                x, sim_dt, sqrt_dt, DIVERGENCE_LIMIT, *tables, noise, out
            )
        else:
            bad = _callable_chunk(model, x, sim_dt, sqrt_dt, noise, out)
        if bad >= 0:
            step = done + bad + 1
            raise DivergenceError(step, float(np.max(np.abs(states[step]))))
        done += take

    return Trajectory(states=states, dt=sim_dt, seed=seed, sim_dt=sim_dt)


def subsample(traj: Trajectory, stride: int) -> Trajectory:
    """Keep every stride-th sample; dt scales by stride, provenance is kept."""
    if stride < 1 or stride != int(stride):
        raise ValueError(f"stride must be a positive integer, got {stride}")
    stride = int(stride)
    if stride + 1 > traj.n_samples:
        raise ValueError(
            f"stride {stride} larger than available samples ({traj.n_samples})"
        )
    return Trajectory(
        states=traj.states[::stride],
        dt=traj.dt * stride,
        seed=traj.seed,
        sim_dt=traj.sim_dt,
    )

"""Compare the compiled stepping kernel against the pure-Python fallback.

Each built-in model is advanced with both kernels on the same noise
stream.  Agreement is checked over a short horizon; chaotic models
(lorenz) amplify last-bit rounding differences exponentially, so long
paths from the two kernels drift apart even though each step agrees to
machine precision.  Throughput is then measured on a long run.  Usage:

    python benchmarks/bench_kernels.py [n_steps]
"""

import sys
import time

import numpy as np

from sdeident import _em_py, backend
from sdeident.models import model_zoo
from sdeident.simulate import euler_maruyama

CHECK_STEPS = 2_000


def run_with(module, model, x0, sim_dt, n_steps, seed):
    saved = backend.active
    backend.active = module
    try:
        t0 = time.perf_counter()
        traj = euler_maruyama(model, x0, sim_dt, n_steps, seed)
        return traj, time.perf_counter() - t0
    finally:
        backend.active = saved


def main():
    n_steps = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    if not backend.HAVE_COMPILED:
        print("compiled kernel not available; nothing to compare")
        return 1
    from sdeident import _em_c

    print(f"agreement over {CHECK_STEPS} steps, throughput over {n_steps} "
          f"steps, sim_dt=2e-4, identical noise streams\n")
    print(f"{'model':<12} {'compiled':>12} {'python':>12} "
          f"{'speedup':>8} {'max |diff|':>12}")
    failed = False
    for name in ("double_well", "van_der_pol", "lorenz"):
        model = model_zoo(name)
        x0 = np.full(model.dim, 0.5)
        short_c, _ = run_with(_em_c, model, x0, 2e-4, CHECK_STEPS, seed=7)
        short_p, _ = run_with(_em_py, model, x0, 2e-4, CHECK_STEPS, seed=7)
        diff = float(np.max(np.abs(short_c.states - short_p.states)))
        agree = np.allclose(
            short_c.states, short_p.states, rtol=1e-9, atol=1e-12
        )
        traj_c, t_c = run_with(_em_c, model, x0, 2e-4, n_steps, seed=20260825)
        _, t_p = run_with(_em_py, model, x0, 2e-4, CHECK_STEPS, seed=20260825)
        rate_c = n_steps / t_c / 1e6
        rate_p = CHECK_STEPS / t_p / 1e6
        print(f"{name:<12} {rate_c:>9.2f} M/s {rate_p:>9.3f} M/s "
              f"{rate_c / rate_p:>7.0f}x {diff:>12.3e}"
              + ("" if agree else "  MISMATCH"))
        failed = failed or not agree
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

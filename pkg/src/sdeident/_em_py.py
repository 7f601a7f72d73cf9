"""Pure-NumPy twin of the compiled stepping kernel.

Slow (one Python-level iteration per step) but dependency-free; selected
automatically when the extension is unavailable.  Signature and noise
consumption match ``_em_c.em_chunk`` exactly.
"""

from __future__ import annotations

import numpy as np


def em_chunk(x, sim_dt, sqrt_dt, limit,
             mu_exp, mu_coef, mu_trig,
             sg_exp, sg_coef, sg_trig,
             noise, out):
    """See the compiled kernel's docstring; x is advanced in place."""
    n = noise.shape[0]
    for step in range(n):
        bmu = np.sin(x) if mu_trig else x
        bsg = np.sin(x) if sg_trig else x
        tmu = np.prod(bmu ** mu_exp, axis=1)
        tsg = np.prod(bsg ** sg_exp, axis=1)
        mu = tmu @ mu_coef
        sig = np.tensordot(tsg, sg_coef, axes=1)
        new = x + mu * sim_dt + sig @ (noise[step] * sqrt_dt)
        x[:] = new
        out[step] = new
        if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > limit:
            return step
    return -1

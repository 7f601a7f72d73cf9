# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Euler-Maruyama stepping for coefficient-table models.

One call advances the state through a chunk of pre-drawn standard
normals.  The caller owns the RNG, so the compiled and pure-Python
kernels consume identical noise streams.
"""

from libc.math cimport fabs, sin
from libc.stdlib cimport free, malloc


def em_chunk(double[::1] x,
             double sim_dt,
             double sqrt_dt,
             double limit,
             const long[:, ::1] mu_exp,
             const double[:, ::1] mu_coef,
             bint mu_trig,
             const long[:, ::1] sg_exp,
             const double[:, :, ::1] sg_coef,
             bint sg_trig,
             const double[:, ::1] noise,
             double[:, ::1] out):
    """Advance x in place through noise.shape[0] steps, recording states in out.

    Returns the chunk-local index of the first step whose new state has a
    non-finite or > limit component, or -1 if the chunk completed.  On
    early return the offending state is still written to out and x.
    """
    cdef Py_ssize_t n = noise.shape[0]
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t km = mu_exp.shape[0]
    cdef Py_ssize_t ks = sg_exp.shape[0]
    cdef Py_ssize_t step, i, j, l, e
    cdef double term, acc, v
    cdef bint bad

    cdef double *buf = <double *> malloc((km + ks + 5 * d) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double *tmu = buf            # drift-basis term values
    cdef double *tsg = tmu + km       # diffusion-basis term values
    cdef double *bmu = tsg + ks       # drift-basis variables
    cdef double *bsg = bmu + d        # diffusion-basis variables
    cdef double *mu = bsg + d         # drift vector
    cdef double *w = mu + d           # scaled noise
    cdef double *xn = w + d           # next state

    try:
        for step in range(n):
            for j in range(d):
                bmu[j] = sin(x[j]) if mu_trig else x[j]
                bsg[j] = sin(x[j]) if sg_trig else x[j]
            for l in range(km):
                term = 1.0
                for j in range(d):
                    e = mu_exp[l, j]
                    while e > 0:
                        term = term * bmu[j]
                        e -= 1
                tmu[l] = term
            for l in range(ks):
                term = 1.0
                for j in range(d):
                    e = sg_exp[l, j]
                    while e > 0:
                        term = term * bsg[j]
                        e -= 1
                tsg[l] = term
            for i in range(d):
                acc = 0.0
                for l in range(km):
                    acc = acc + mu_coef[l, i] * tmu[l]
                mu[i] = acc
            for j in range(d):
                w[j] = noise[step, j] * sqrt_dt
            bad = 0
            for i in range(d):
                acc = x[i] + mu[i] * sim_dt
                for j in range(d):
                    v = 0.0
                    for l in range(ks):
                        v = v + sg_coef[l, i, j] * tsg[l]
                    acc = acc + v * w[j]
                xn[i] = acc
                if acc != acc or fabs(acc) > limit:
                    bad = 1
            for i in range(d):
                x[i] = xn[i]
                out[step, i] = xn[i]
            if bad:
                return step
        return -1
    finally:
        free(buf)

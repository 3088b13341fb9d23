# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the Monte Carlo hot loops.

``sample_paths`` turns per-trial uniform draws into chain paths by
inverse-CDF lookup on cumulative transition rows; ``running_sup_sum``
accumulates Hermitian step matrices along index paths and tracks the running
maximum spectral norm.  Both mirror ``_pyfallback`` operation for operation,
so the two backends agree up to eigensolver round-off.
"""

import numpy as np

from libc.math cimport fabs, sqrt


def sample_paths(const double[:, ::1] row_cum, const double[::1] init_cum,
                 const double[:, ::1] uniforms):
    """Map uniforms (trials, length) to state paths via cumulative rows."""
    cdef Py_ssize_t n_trials = uniforms.shape[0]
    cdef Py_ssize_t length = uniforms.shape[1]
    cdef Py_ssize_t m = init_cum.shape[0]
    out = np.empty((n_trials, length), dtype=np.int64)
    cdef long long[:, ::1] path = out
    cdef Py_ssize_t t, k, j, s
    cdef double u
    with nogil:
        for t in range(n_trials):
            u = uniforms[t, 0]
            j = 0
            while j < m - 1 and u >= init_cum[j]:
                j += 1
            s = j
            path[t, 0] = s
            for k in range(1, length):
                u = uniforms[t, k]
                j = 0
                while j < m - 1 and u >= row_cum[s, j]:
                    j += 1
                s = j
                path[t, k] = s
    return out


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef double _spec_norm(double complex* a, double complex* w, Py_ssize_t d) nogil:
    """Spectral norm of a d x d Hermitian matrix stored row-major in `a`.

    d = 1, 2 use closed forms; otherwise a cyclic complex Jacobi sweep runs on
    the scratch buffer `w` (a is untouched).
    """
    cdef double app, aqq, mid, rad, absb, sigma, tt, c, s, off, fro, tol, best
    cdef double complex b, phase, cphase, wip, wiq, wpi, wqi
    cdef Py_ssize_t p, q, i, sweep
    if d == 1:
        return fabs(a[0].real)
    if d == 2:
        app = a[0].real
        aqq = a[3].real
        mid = 0.5 * (app + aqq)
        rad = sqrt(0.25 * (app - aqq) * (app - aqq) + _abs2(a[1]))
        return fabs(mid) + rad
    for i in range(d * d):
        w[i] = a[i]
    fro = 0.0
    for i in range(d * d):
        fro += _abs2(w[i])
    if fro == 0.0:
        return 0.0
    tol = 1e-28 * fro
    for sweep in range(60):
        off = 0.0
        for p in range(d):
            for q in range(p + 1, d):
                off += _abs2(w[p * d + q])
        if off <= tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                b = w[p * d + q]
                absb = sqrt(_abs2(b))
                if absb <= 1e-300:
                    continue
                phase = b / absb
                cphase = phase.conjugate()
                app = w[p * d + p].real
                aqq = w[q * d + q].real
                sigma = (app - aqq) / (2.0 * absb)
                if sigma >= 0:
                    tt = 1.0 / (sigma + sqrt(1.0 + sigma * sigma))
                else:
                    tt = -1.0 / (-sigma + sqrt(1.0 + sigma * sigma))
                c = 1.0 / sqrt(1.0 + tt * tt)
                s = tt * c
                for i in range(d):
                    wip = w[i * d + p]
                    wiq = w[i * d + q] * cphase
                    w[i * d + p] = c * wip + s * wiq
                    w[i * d + q] = c * wiq - s * wip
                for i in range(d):
                    wpi = w[p * d + i]
                    wqi = w[q * d + i] * phase
                    w[p * d + i] = c * wpi + s * wqi
                    w[q * d + i] = c * wqi - s * wpi
                w[p * d + q] = 0
                w[q * d + p] = 0
    best = 0.0
    for i in range(d):
        if fabs(w[i * d + i].real) > best:
            best = fabs(w[i * d + i].real)
    return best


def running_sup_sum(const double complex[:, :, ::1] steps, const long long[:, ::1] idx,
                    bint want_terminal=True):
    """Accumulate steps[idx[t, k]] over k; return per-trial sup spectral norm.

    Returns (sup, terminal) where terminal is the final accumulated matrix
    stack (trials, d, d), or None when want_terminal is false.
    """
    cdef Py_ssize_t n_trials = idx.shape[0]
    cdef Py_ssize_t length = idx.shape[1]
    cdef Py_ssize_t d = steps.shape[1]
    cdef Py_ssize_t dd = d * d
    sup_arr = np.zeros(n_trials, dtype=np.float64)
    cdef double[::1] sup = sup_arr
    term_obj = np.zeros((n_trials, d, d), dtype=np.complex128) if want_terminal else None
    cdef double complex[:, :, ::1] term = term_obj if want_terminal else None
    buf = np.zeros(2 * dd, dtype=np.complex128)
    cdef double complex[::1] work = buf
    cdef double complex* S
    cdef double complex* W
    cdef Py_ssize_t t, k, i, j, s
    cdef double best, nrm
    S = &work[0]
    W = &work[dd]
    with nogil:
        for t in range(n_trials):
            for i in range(dd):
                S[i] = 0
            best = 0.0
            for k in range(length):
                s = idx[t, k]
                for i in range(d):
                    for j in range(d):
                        S[i * d + j] = S[i * d + j] + steps[s, i, j]
                nrm = _spec_norm(S, W, d)
                if nrm > best:
                    best = nrm
            sup[t] = best
            if want_terminal:
                for i in range(d):
                    for j in range(d):
                        term[t, i, j] = S[i * d + j]
    return sup_arr, term_obj

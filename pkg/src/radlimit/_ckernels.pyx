# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the transport and relaxation kernels.

Same contracts and arithmetic as ``_pykernels``.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def upwind_accumulate(const double[:, :, ::1] psi, const double[::1] vel,
                      const double[:, ::1] glo, const double[:, ::1] ghi,
                      double coef, double[:, :, ::1] out):
    cdef Py_ssize_t n_outer = psi.shape[0], n = psi.shape[1], n_inner = psi.shape[2]
    cdef Py_ssize_t o, i, k
    cdef double v, vp, vm, left, right, f_lo, f_hi
    with nogil:
        for o in range(n_outer):
            for k in range(n_inner):
                v = vel[k]
                vp = v if v > 0.0 else 0.0
                vm = v if v < 0.0 else 0.0
                f_lo = vp * glo[o, k] + vm * psi[o, 0, k]
                for i in range(n):
                    left = psi[o, i, k]
                    right = psi[o, i + 1, k] if i + 1 < n else ghi[o, k]
                    f_hi = vp * left + vm * right
                    out[o, i, k] -= coef * (f_hi - f_lo)
                    f_lo = f_hi


def relax_temperature(T, S, double a, double W, double tol, int maxit):
    cdef double[::1] Tn = np.ascontiguousarray(T, dtype=np.float64).ravel()
    cdef double[::1] Sv = np.ascontiguousarray(S, dtype=np.float64).ravel()
    result = np.empty(Tn.shape[0], dtype=np.float64)
    cdef double[::1] x_out = result
    cdef Py_ssize_t n = Tn.shape[0], j
    cdef int it, last_it, max_it = 0, n_clamped = 0
    cdef Py_ssize_t failed = -1
    cdef double c = a / (1.0 + a)
    cdef double lo, hi, x, x2, f, fp, xn, step
    cdef bint converged
    with nogil:
        for j in range(n):
            hi = Tn[j] + c * Sv[j]
            lo = 0.0
            if hi < 0.0:
                x_out[j] = 0.0
                n_clamped += 1
                continue
            x = Tn[j]
            if x < lo:
                x = lo
            if x > hi:
                x = hi
            converged = False
            last_it = 0
            for it in range(1, maxit + 1):
                x2 = x * x
                f = x - Tn[j] - c * (Sv[j] - W * (x2 * x2))
                if f > 0.0:
                    hi = x
                else:
                    lo = x
                fp = 1.0 + 4.0 * c * W * (x2 * x)
                xn = x - f / fp
                if xn < lo or xn > hi:
                    xn = 0.5 * (lo + hi)
                step = xn - x if xn >= x else x - xn
                x = xn
                last_it = it
                if step <= tol * (xn if xn > 1.0 else 1.0):
                    converged = True
                    break
            x_out[j] = x
            if last_it > max_it:
                max_it = last_it
            if not converged and failed < 0:
                failed = j
    return result.reshape(np.shape(T)), max_it, n_clamped, failed

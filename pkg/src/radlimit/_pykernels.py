"""Pure numpy implementations of the hot kernels.

Mirrors ``_ckernels.pyx`` operation for operation so both backends give the
same floating-point results.
"""

import numpy as np


def upwind_accumulate(psi, vel, glo, ghi, coef, out):
    """Add ``-coef * (F[i+1/2] - F[i-1/2])`` along the middle axis to ``out``.

    ``psi``/``out`` have shape (outer, n, inner); ``vel`` has shape (inner,);
    ``glo``/``ghi`` are the ghost layers before index 0 and after n-1,
    shape (outer, inner). Upwind flux: F = max(v,0) psi_L + min(v,0) psi_R.
    """
    vp = np.maximum(vel, 0.0)
    vm = np.minimum(vel, 0.0)
    ext = np.concatenate([glo[:, None, :], psi, ghi[:, None, :]], axis=1)
    flux = vp * ext[:, :-1, :] + vm * ext[:, 1:, :]
    out -= coef * (flux[:, 1:, :] - flux[:, :-1, :])


def relax_temperature(T, S, a, W, tol, maxit):
    """Solve T - Tn - c (S - W T^4) = 0 per cell, c = a / (1 + a).

    Safeguarded Newton on the bracket [0, Tn + c S]. Returns
    ``(T_new, max_iters, n_clamped, failed_index)`` with ``failed_index``
    equal to -1 on success.
    """
    Tn = np.ascontiguousarray(T, dtype=float).ravel()
    S = np.ascontiguousarray(S, dtype=float).ravel()
    c = a / (1.0 + a)
    hi = Tn + c * S
    lo = np.zeros_like(hi)
    x = np.minimum(np.maximum(Tn, lo), hi)

    negative = hi < 0.0
    n_clamped = int(np.count_nonzero(negative))
    x[negative] = 0.0
    hi[negative] = 0.0

    active = ~negative
    iters = np.zeros(Tn.shape, dtype=np.int64)
    for it in range(1, maxit + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xi = x[idx]
        x2 = xi * xi
        f = xi - Tn[idx] - c * (S[idx] - W * (x2 * x2))
        pos = f > 0.0
        hi[idx[pos]] = xi[pos]
        lo[idx[~pos]] = xi[~pos]
        fp = 1.0 + 4.0 * c * W * (x2 * xi)
        xn = xi - f / fp
        bad = (xn < lo[idx]) | (xn > hi[idx])
        xn[bad] = 0.5 * (lo[idx[bad]] + hi[idx[bad]])
        step = np.abs(xn - xi)
        x[idx] = xn
        iters[idx] = it
        done = step <= tol * np.maximum(1.0, xn)
        active[idx[done]] = False

    failed = np.flatnonzero(active)
    failed_index = int(failed[0]) if failed.size else -1
    return x.reshape(np.shape(T)), int(iters.max(initial=0)), n_clamped, failed_index

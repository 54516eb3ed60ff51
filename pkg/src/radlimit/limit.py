"""Nonlinear diffusion limit d/dt (T + 4 pi T^4) = Lap (T + (4 pi / 3) T^4).

Stepped by backward Euler in the conserved variable ``u = T + 4 pi T^4``.
On walls the limit temperature equals the boundary temperature for every
regime (Dirichlet and Robin alike), imposed through Dirichlet ghosts on
``v = T + (4 pi / 3) T^4`` with the shared Laplacian stencil.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import BCMode, BoundaryData, Params, SpatialGrid
from .kinetic import SolverError, face_data, time_levels
from .stencil import build_laplacian

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


@dataclass
class LimitState:
    time: float
    temperature: np.ndarray
    grid: SpatialGrid

    def __post_init__(self):
        self.temperature = np.ascontiguousarray(self.temperature, dtype=float)
        if self.temperature.shape != self.grid.shape:
            raise ValueError("temperature shape does not match grid")
        if np.any(self.temperature < 0):
            raise ValueError("limit temperature must be nonnegative")


def u_of_T(T):
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("u_of_T needs T >= 0")
    T2 = T * T
    out = T + FOUR_PI * T2 * T2
    return float(out) if out.ndim == 0 else out


def v_of_T(T):
    T = np.asarray(T, dtype=float)
    T2 = T * T
    return T + FOUR_PI / 3.0 * T2 * T2


def dv_du(T):
    T3 = np.asarray(T, dtype=float) ** 3
    return (1.0 + 16.0 * np.pi / 3.0 * T3) / (1.0 + 16.0 * np.pi * T3)


def t_of_u(u, rtol: float = 1e-13, max_iter: int = 100):
    """Invert ``u = T + 4 pi T^4`` on T >= 0.

    Newton on a convex increasing function started to the right of the
    root, so the iterates decrease monotonically onto it.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("t_of_u needs u >= 0")
    x = np.minimum(u, (u / FOUR_PI) ** 0.25)
    for _ in range(max_iter):
        x2 = x * x
        f = x + FOUR_PI * x2 * x2 - u
        step = f / (1.0 + 4.0 * FOUR_PI * x2 * x)
        x = np.maximum(x - step, 0.0)
        if np.all(np.abs(step) <= rtol * np.maximum(x, 1e-300)):
            break
    else:
        raise SolverError("t_of_u failed to converge")
    return float(x) if x.ndim == 0 else x


def _operator(grid: SpatialGrid, params: Params):
    kind = "periodic" if params.bc_mode is BCMode.TORUS else "dirichlet"
    return build_laplacian(grid, kind)


def limit_step(state: LimitState, dt: float, params: Params,
               boundary_data: Optional[BoundaryData], t: float,
               tol: float = 1e-11, max_iter: int = 40) -> LimitState:
    """One backward-Euler step; boundary data evaluated at time ``t``.

    Newton with the assembled Jacobian ``I - dt Lap diag(dv/du)`` and
    backtracking; falls back to a secant-diffusivity fixed point if Newton
    stalls.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    grid.check_bc_mode(params.bc_mode)
    lap = _operator(grid, params)
    g = np.zeros(grid.n_cells)
    if lap.faces:
        if boundary_data is None:
            raise ValueError("walls need boundary data")
        tb = face_data(grid, t, boundary_data.t_boundary, lap.faces)
        g = lap.boundary_vector([v_of_T(b) for b in tb])
    L = lap.matrix
    n = grid.n_cells
    eye = sp.identity(n, format="csc")

    un = u_of_T(np.ravel(state.temperature))
    scale = tol * max(1.0, float(np.max(np.abs(un))))

    def residual(u):
        T = t_of_u(np.maximum(u, 0.0))
        return u - un - dt * (L @ v_of_T(T) + g), T

    u = un.copy()
    G, T = residual(u)
    norm = np.max(np.abs(G))
    converged = norm <= scale
    for _ in range(max_iter):
        if converged:
            break
        J = (eye - dt * L @ sp.diags(dv_du(T))).tocsc()
        delta = spla.spsolve(J, -G)
        lam = 1.0
        while lam > 1e-4:
            trial = u + lam * delta
            G_try, T_try = residual(trial)
            norm_try = np.max(np.abs(G_try))
            if norm_try < norm or norm_try <= scale:
                break
            lam *= 0.5
        else:
            break
        u, G, T, norm = trial, G_try, T_try, norm_try
        converged = norm <= scale
    if not converged:
        log.info("limit Newton stalled at residual %.3e; using fixed-point fallback", norm)
        u, T, converged = _fixed_point(u, un, dt, L, g, eye, scale)
    if not converged:
        raise SolverError(f"limit step did not converge at t={t:g}")
    return LimitState(float(t), T.reshape(grid.shape), grid)


def _fixed_point(u, un, dt, L, g, eye, scale, max_iter=500):
    """Lagged secant diffusivity: (I - dt L diag(v(u_k)/u_k)) u = un + dt g."""
    for _ in range(max_iter):
        T = t_of_u(np.maximum(u, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(u > 0, v_of_T(T) / np.where(u > 0, u, 1.0), 1.0)
        A = (eye - dt * L @ sp.diags(ratio)).tocsc()
        u = spla.spsolve(A, un + dt * g)
        T = t_of_u(np.maximum(u, 0.0))
        res = u - un - dt * (L @ v_of_T(T) + g)
        if np.max(np.abs(res)) <= scale:
            return u, T, True
    return u, T, False


def limit_advance(state: LimitState, t_end: float, dt: float, params: Params,
                  boundary_data: Optional[BoundaryData] = None,
                  observer: Optional[Callable[[LimitState], None]] = None) -> LimitState:
    for t_next in time_levels(state.time, t_end, dt):
        state = limit_step(state, float(t_next - state.time), params, boundary_data,
                           float(t_next))
        if observer is not None:
            observer(state)
    return state

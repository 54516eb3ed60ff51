"""Time integration of the epsilon-scaled temperature/intensity system.

    dT/dt   = Lap T + (1/eps^2) <psi - T^4>
    dpsi/dt + (1/eps) beta.grad psi = -(1/eps^2) (psi - T^4)

One step is a first-order Lie splitting: explicit upwind transport, then a
backward-Euler diffusion solve, then a pointwise backward-Euler relaxation
that eliminates psi and solves one scalar equation per cell.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .core import BCMode, BoundaryData, Face, KineticState, Params, SpatialGrid
from .quadrature import AngularQuadrature, reflection_map
from .stencil import build_laplacian

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class CFLViolation(SolverError):
    pass


class NewtonFailure(SolverError):
    pass


class LinearSolverFailure(SolverError):
    pass


@dataclass(frozen=True)
class KineticSolverConfig:
    cfl: float = 0.5
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    dt_override: Optional[float] = None
    galerkin_modes: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if self.dt_override is not None and not self.dt_override > 0:
            raise ValueError("dt_override must be positive")
        if self.galerkin_modes is not None and self.galerkin_modes < 0:
            raise ValueError("galerkin_modes must be >= 0")


@dataclass
class StepReport:
    time: float
    dt_used: float
    newton_iters_max: int
    clamped_cells: int


Observer = Callable[[KineticState, StepReport], None]


def courant_speed(grid: SpatialGrid, quad: AngularQuadrature) -> float:
    """max over ordinates of sum_a |beta_a| / dx_a (unit epsilon)."""
    proj = np.abs(quad.nodes[:, :grid.dim]) / grid.spacing[None, :]
    return float(np.max(proj.sum(axis=1)))


def stable_dt(grid: SpatialGrid, quad: AngularQuadrature, params: Params,
              config: KineticSolverConfig) -> float:
    if config.dt_override is not None:
        return float(config.dt_override)
    dx_min = float(np.min(grid.spacing))
    speed = float(np.max(np.abs(quad.nodes[:, :grid.dim]).sum(axis=1)))
    transport = config.cfl * params.epsilon * dx_min / speed if speed > 0 else math.inf
    # explicit-diffusion margin kept as a cap although diffusion is implicit
    return min(transport, dx_min ** 2 / (2 * grid.dim))


def time_levels(t0: float, t_end: float, dt: float) -> np.ndarray:
    """Step end times from ``t0`` to ``t_end``; the last step is truncated."""
    if t_end < t0:
        raise ValueError(f"t_end={t_end} precedes the current time {t0}")
    if t_end == t0:
        return np.empty(0)
    n = max(1, int(math.ceil((t_end - t0) / dt - 1e-9)))
    levels = t0 + dt * np.arange(1, n + 1)
    levels[-1] = t_end
    return levels


def apply_psi_boundary(state: KineticState, t: float, face: Face, params: Params,
                       quad: AngularQuadrature, boundary_data: BoundaryData) -> np.ndarray:
    """Ghost intensities behind ``face``, shape ``face.cells.shape + (nq,)``.

    Incoming ordinates (n.beta < 0) get ``alpha psi_b + (1 - alpha) L psi``
    where ``L psi`` is the adjacent cell's value at the mirrored ordinate.
    Outgoing ordinates copy the adjacent cell (their ghost never enters an
    upwind flux).
    """
    if state.grid.periodic_per_axis[face.axis]:
        raise ValueError(f"face {face.name} lies on a periodic axis")
    nq = quad.size
    adjacent = state.intensity.reshape(-1, nq)[face.cells]
    perm = _reflection_perm(quad, face.axis, face.side)
    mirrored = adjacent[..., perm]
    psi_b = np.asarray(boundary_data.psi_boundary(t, face.points, quad.nodes), float)
    incoming = _incoming_mask(quad, face.axis, face.side)
    a = params.alpha
    return np.where(incoming, a * psi_b + (1.0 - a) * mirrored, adjacent)


@lru_cache(maxsize=128)
def _reflection_perm(quad, axis, side):
    n = np.zeros(3)
    n[axis] = 1.0 if side else -1.0
    return reflection_map(quad, n)


@lru_cache(maxsize=128)
def _incoming_mask(quad, axis, side):
    sign = 1.0 if side else -1.0
    return sign * quad.nodes[:, axis] < 0.0


def step_transport(state: KineticState, dt: float, params: Params, quad: AngularQuadrature,
                   boundary: Optional[BoundaryData] = None) -> np.ndarray:
    """First-order upwind update of psi along every ordinate; returns new psi."""
    grid = state.grid
    eps = params.epsilon
    courant = dt / eps * courant_speed(grid, quad)
    if courant > 1.0 + 1e-12:
        raise CFLViolation(f"transport Courant number {courant:.6g} exceeds 1 (dt={dt:g})")
    psi = state.intensity
    nq = quad.size
    out = psi.copy()
    faces = {(f.axis, f.side): f for f in grid.boundary_faces()}
    if faces and boundary is None:
        raise ValueError("non-periodic grid requires boundary data for transport")
    shape = grid.shape
    for a in range(grid.dim):
        v = quad.nodes[:, a] / eps
        if not np.any(v):
            continue
        outer = int(np.prod(shape[:a]))
        inner = int(np.prod(shape[a + 1:])) * nq
        psi3 = psi.reshape(outer, shape[a], inner)
        out3 = out.reshape(outer, shape[a], inner)
        vel = np.ascontiguousarray(np.tile(v, inner // nq))
        if grid.periodic_per_axis[a]:
            glo = np.ascontiguousarray(psi3[:, -1, :])
            ghi = np.ascontiguousarray(psi3[:, 0, :])
        else:
            glo = apply_psi_boundary(state, state.time, faces[(a, 0)], params, quad, boundary)
            ghi = apply_psi_boundary(state, state.time, faces[(a, 1)], params, quad, boundary)
            glo = np.ascontiguousarray(glo).reshape(outer, inner)
            ghi = np.ascontiguousarray(ghi).reshape(outer, inner)
        kernels.upwind_accumulate(psi3, vel, glo, ghi, dt / grid.spacing[a], out3)
    return out


def step_relaxation(state: KineticState, dt: float, params: Params, quad: AngularQuadrature,
                    newton_tol: float = 1e-12, newton_max_iter: int = 50):
    """Backward-Euler relaxation of (T, psi) toward psi = T^4, cell by cell.

    With ``a = dt/eps^2`` the psi update is ``psi' = (psi + a T'^4) / (1 + a)``;
    substituting into the temperature equation leaves
    ``T' - T - a/(1+a) (<psi> - W T'^4) = 0`` with ``W = sum of weights``,
    which conserves ``T + <psi>`` exactly at the root.
    """
    a = dt / params.epsilon ** 2
    S = state.intensity @ quad.weights
    W = quad.total_weight
    T_new, iters, clamped, failed = kernels.relax_temperature(
        state.temperature, S, a, W, newton_tol, newton_max_iter)
    if failed >= 0:
        cell = np.unravel_index(failed, state.grid.shape)
        raise NewtonFailure(f"relaxation Newton did not converge in cell {cell} "
                            f"after {newton_max_iter} iterations")
    if clamped:
        log.warning("relaxation clamped %d cells to T = 0", clamped)
    T2 = T_new * T_new
    psi_new = (state.intensity + a * (T2 * T2)[..., None]) / (1.0 + a)
    return T_new, psi_new, StepReport(state.time, dt, iters, clamped)


def _diffusion_kind(params: Params):
    if params.bc_mode is BCMode.TORUS:
        return "periodic", 0.0
    if params.bc_mode is BCMode.DIRICHLET:
        return "dirichlet", 0.0
    return "robin", params.epsilon ** params.robin_r


def face_data(grid: SpatialGrid, t: float, fn, faces=None) -> list:
    faces = grid.boundary_faces() if faces is None else faces
    return [np.asarray(fn(t, f.points), float) for f in faces]


@lru_cache(maxsize=32)
def _implicit_operator(lap, dt):
    n = lap.grid.n_cells
    A = (sp.identity(n, format="csr") - dt * lap.matrix).tocsr()
    inv_diag = 1.0 / A.diagonal()
    return A, spla.LinearOperator((n, n), matvec=lambda x: inv_diag * x)


def step_diffusion(temperature: np.ndarray, dt: float, params: Params,
                   boundary_data: Optional[BoundaryData], t: float,
                   grid: SpatialGrid) -> np.ndarray:
    """Backward-Euler solve of (I - dt Lap_h) T' = T, boundary data at time ``t``.

    Uses Jacobi-preconditioned conjugate gradients to a relative residual
    of 1e-12.
    """
    kind, eps_r = _diffusion_kind(params)
    lap = build_laplacian(grid, kind, eps_r)
    A, M = _implicit_operator(lap, float(dt))
    rhs = np.ravel(temperature).astype(float, copy=True)
    if lap.faces:
        if boundary_data is None:
            raise ValueError(f"{params.bc_mode.value} diffusion needs boundary data")
        rhs += dt * lap.boundary_vector(face_data(grid, t, boundary_data.t_boundary, lap.faces))
    x, info = spla.cg(A, rhs, x0=np.ravel(temperature).copy(), rtol=1e-12, atol=0.0,
                      maxiter=20 * grid.n_cells, M=M)
    if info != 0:
        raise LinearSolverFailure(f"diffusion CG did not converge (info={info})")
    return x.reshape(grid.shape)


def _check_setup(state, params, quad, boundary_data):
    state.grid.check_bc_mode(params.bc_mode)
    if state.n_ordinates != quad.size:
        raise ValueError(f"state has {state.n_ordinates} ordinates, quadrature {quad.size}")
    if params.bc_mode is not BCMode.TORUS:
        if boundary_data is None:
            raise ValueError(f"{params.bc_mode.value} mode requires boundary data")
        for f in state.grid.boundary_faces():
            boundary_data.check(f.points, quad.nodes, state.time)


def advance(state: KineticState, t_end: float, params: Params, config: KineticSolverConfig,
            quad: AngularQuadrature, boundary_data: Optional[BoundaryData] = None,
            observer: Optional[Observer] = None) -> KineticState:
    """Run transport -> diffusion -> relaxation steps until ``t_end``."""
    _check_setup(state, params, quad, boundary_data)
    dt = stable_dt(state.grid, quad, params, config)
    state = state.copy()
    for t_next in time_levels(state.time, t_end, dt):
        h = t_next - state.time
        psi = step_transport(state, h, params, quad, boundary_data)
        T = step_diffusion(state.temperature, h, params, boundary_data, t_next, state.grid)
        T, psi, report = step_relaxation(KineticState(state.time, T, psi, state.grid), h,
                                         params, quad, config.newton_tol, config.newton_max_iter)
        report.time = float(t_next)
        state = KineticState(float(t_next), T, psi, state.grid)
        if observer is not None:
            observer(state, report)
    return state


class FourierProjector:
    """Truncation to integer wavevectors with Euclidean length ``|k| <= m``."""

    def __init__(self, grid: SpatialGrid, m: int):
        if not grid.fully_periodic:
            raise ValueError("Fourier truncation needs a fully periodic grid")
        ks = np.meshgrid(*[np.fft.fftfreq(n, d=1.0 / n) for n in grid.shape], indexing="ij")
        kmag = np.sqrt(sum(k ** 2 for k in ks))
        self.m = int(m)
        self.nyquist = float(kmag.max())
        self.mask = kmag <= m

    def __call__(self, f: np.ndarray) -> np.ndarray:
        axes = tuple(range(self.mask.ndim))
        return np.real(np.fft.ifftn(np.fft.fftn(f, axes=axes) * self._expand(f), axes=axes))

    def _expand(self, f):
        extra = f.ndim - self.mask.ndim
        return self.mask.reshape(self.mask.shape + (1,) * extra)


def step_relaxation_galerkin(state: KineticState, dt: float, params: Params,
                             quad: AngularQuadrature, projector: FourierProjector,
                             newton_tol: float = 1e-12, newton_max_iter: int = 50):
    """Relaxation with T^4 replaced by its Fourier truncation P_m(T^4).

    The coupling is no longer cell-local, so the scalar equations are
    solved together by Newton-GMRES with a Jacobi preconditioner.
    """
    a = dt / params.epsilon ** 2
    c = a / (1.0 + a)
    W = quad.total_weight
    S = state.intensity @ quad.weights
    Tn = state.temperature
    x = Tn.copy()
    n = x.size

    def residual(x):
        x2 = x * x
        return x - Tn - c * (S - W * projector(x2 * x2))

    iters = 0
    for iters in range(1, newton_max_iter + 1):
        f = residual(x)
        d = 4.0 * x ** 3
        jac = spla.LinearOperator(
            (n, n), matvec=lambda v: v + c * W * np.ravel(projector(d * v.reshape(x.shape))))
        prec = 1.0 + c * W * np.ravel(d)
        M = spla.LinearOperator((n, n), matvec=lambda v: v / prec)
        delta, info = spla.gmres(jac, -np.ravel(f), rtol=1e-14, atol=0.0, M=M,
                                 restart=min(n, 200), maxiter=50)
        if info < 0:
            raise LinearSolverFailure(f"Galerkin relaxation GMRES breakdown (info={info})")
        x = x + delta.reshape(x.shape)
        if np.max(np.abs(delta)) <= newton_tol * max(1.0, float(np.max(np.abs(x)))):
            break
    else:
        raise NewtonFailure(f"Galerkin relaxation Newton did not converge after "
                            f"{newton_max_iter} iterations")
    clamped = int(np.count_nonzero(x < 0))
    if clamped:
        log.warning("Galerkin relaxation clamped %d cells to T = 0", clamped)
        x = np.maximum(x, 0.0)
    x2 = x * x
    psi_new = (state.intensity + a * projector(x2 * x2)[..., None]) / (1.0 + a)
    return x, psi_new, StepReport(state.time, dt, iters, clamped)


def galerkin_advance(state: KineticState, t_end: float, params: Params,
                     config: KineticSolverConfig, quad: AngularQuadrature,
                     observer: Optional[Observer] = None) -> KineticState:
    """Torus-only variant using the truncation P_m of the emission term.

    Initial data are projected as well, matching the Galerkin construction.
    """
    if params.bc_mode is not BCMode.TORUS:
        raise ValueError("galerkin_advance is available in torus mode only")
    if config.galerkin_modes is None:
        raise ValueError("galerkin_advance needs config.galerkin_modes")
    _check_setup(state, params, quad, None)
    proj = FourierProjector(state.grid, config.galerkin_modes)
    dt = stable_dt(state.grid, quad, params, config)
    state = KineticState(state.time, proj(state.temperature), proj(state.intensity), state.grid)
    for t_next in time_levels(state.time, t_end, dt):
        h = t_next - state.time
        psi = step_transport(state, h, params, quad)
        T = step_diffusion(state.temperature, h, params, None, t_next, state.grid)
        T, psi, report = step_relaxation_galerkin(
            KineticState(state.time, T, psi, state.grid), h, params, quad, proj,
            config.newton_tol, config.newton_max_iter)
        report.time = float(t_next)
        state = KineticState(float(t_next), T, psi, state.grid)
        if observer is not None:
            observer(state, report)
    return state

"""Energy, energy-inequality audits, relative entropy and rate fitting.

Spatial integrals are midpoint cell sums, angular integrals use the
ordinate weights and wall integrals are face sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import BCMode, BoundaryData, KineticState, Params, SpatialGrid
from .quadrature import AngularQuadrature
from .stencil import ghost_coefficients


@dataclass
class EnergyRecord:
    time: float
    energy_T5: float
    energy_psi2: float
    dissipation_grad: float
    dissipation_relax: float
    boundary_psi: float = 0.0
    boundary_T5: float = 0.0


@dataclass
class EntropyRecord:
    time: float
    H: float
    H_T_part: float
    H_psi_part: float
    error_L4_4: float
    error_L2_2: float
    # same quantities restricted to cells off the wall ring
    interior: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return self.error_L4_4 + self.error_L2_2


ENERGY_COLUMNS = ("time", "energy_T5", "energy_psi2", "dissipation_grad", "dissipation_relax",
                  "boundary_psi", "boundary_T5", "residual")
ENTROPY_COLUMNS = ("time", "H", "H_T_part", "H_psi_part", "error_L4_4", "error_L2_2")


# --------------------------------------------------------------------------
# energy

def energy(state: KineticState, quad: AngularQuadrature, grid: Optional[SpatialGrid] = None):
    """Return ``(int T^5/5 dx, int int psi^2/2 dbeta dx)``."""
    grid = state.grid if grid is None else grid
    vol = grid.cell_volume
    T = state.temperature
    e_T = vol * float(np.sum(T ** 5)) / 5.0
    e_psi = vol * float(np.sum((state.intensity ** 2) @ quad.weights)) / 2.0
    return e_T, e_psi


def _face_temperatures(T, grid, params, boundary_data, t):
    """Wall temperature per face from the solver's ghost closure."""
    out = []
    if params.bc_mode is BCMode.TORUS:
        return out
    flat = np.ravel(T)
    for f in grid.boundary_faces():
        tb = np.asarray(boundary_data.t_boundary(t, f.points), float)
        if params.bc_mode is BCMode.DIRICHLET:
            out.append((f, tb, tb))
        else:
            ci, cb = ghost_coefficients("robin", grid.spacing[f.axis],
                                        params.epsilon ** params.robin_r)
            ghost = ci * flat[f.cells] + cb * tb
            out.append((f, 0.5 * (ghost + flat[f.cells]), tb))
    return out


def gradient_dissipation(T, grid: SpatialGrid, params: Params,
                         boundary_data: Optional[BoundaryData] = None, t: float = 0.0) -> float:
    """Discrete ``int |grad T^{5/2}|^2 dx`` from face differences."""
    p = np.maximum(T, 0.0) ** 2.5
    vol = grid.cell_volume
    total = 0.0
    for a in range(grid.dim):
        dx = grid.spacing[a]
        if grid.periodic_per_axis[a]:
            diff = np.roll(p, -1, axis=a) - p
        else:
            diff = np.diff(p, axis=a)
        total += vol * float(np.sum((diff / dx) ** 2))
    flat = np.ravel(p)
    for f, t_face, _ in _face_temperatures(T, grid, params, boundary_data, t):
        half = 0.5 * grid.spacing[f.axis]
        p_face = np.maximum(t_face, 0.0) ** 2.5
        total += f.area * half * float(np.sum(((flat[f.cells] - p_face) / half) ** 2))
    return total


def energy_record(state: KineticState, quad: AngularQuadrature, params: Params,
                  boundary_data: Optional[BoundaryData] = None, projector=None) -> EnergyRecord:
    grid = state.grid
    e_T, e_psi = energy(state, quad)
    T4 = state.temperature ** 4
    if projector is not None:
        T4 = projector(T4)
    relax = grid.cell_volume * float(np.sum(((state.intensity - T4[..., None]) ** 2)
                                            @ quad.weights)) / params.epsilon ** 2
    grad = gradient_dissipation(state.temperature, grid, params, boundary_data, state.time)
    rec = EnergyRecord(state.time, e_T, e_psi, grad, relax)
    if params.bc_mode is not BCMode.TORUS:
        rec.boundary_psi = _outflow_term(state, quad, params, boundary_data)
        if params.bc_mode is BCMode.ROBIN:
            faces = _face_temperatures(state.temperature, grid, params, boundary_data, state.time)
            rec.boundary_T5 = sum(f.area * float(np.sum(np.abs(tf - tb) ** 5))
                                  for f, tf, tb in faces) / params.epsilon ** params.robin_r
    return rec


def _outflow_term(state, quad, params, boundary_data):
    """(2 alpha - alpha^2)/(2 eps) * int_{Sigma+} (n.beta) (psi - psi_b)^2."""
    a = params.alpha
    total = 0.0
    nq = quad.size
    psi = state.intensity.reshape(-1, nq)
    for f in state.grid.boundary_faces():
        nb = quad.nodes @ f.normal
        out = nb > 0
        psi_b = np.asarray(boundary_data.psi_boundary(state.time, f.points, quad.nodes), float)
        diff2 = (psi[f.cells] - psi_b) ** 2
        total += f.area * float(np.sum(diff2[..., out] @ (quad.weights[out] * nb[out])))
    return (2 * a - a * a) / (2 * params.epsilon) * total


@dataclass
class AuditResult:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    c_fit: Optional[float]
    terms_nonnegative: bool

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))


def energy_audit(records: Sequence[EnergyRecord], params: Params,
                 regime: Optional[BCMode] = None, c_max: float = 1e3) -> AuditResult:
    """Signed residuals LHS(t) - RHS(t) of the energy inequality.

    Torus: ``E(t) + 16/25 int D_grad + int D_relax - E(0)``.
    Walls: the Gronwall form ``LHS(t) <= C e^{C t} RHS(0)`` with LHS built
    from ``||T||_5^5 + ||psi||_2^2`` and the time-integrated dissipation and
    wall terms; ``C >= 1`` is the smallest value honouring every record
    (capped at ``c_max``), since the constant is not constructive.
    """
    if not records:
        raise ValueError("energy_audit needs at least one record")
    regime = params.bc_mode if regime is None else BCMode.parse(regime)
    t = np.array([r.time for r in records])
    if np.any(np.diff(t) < 0):
        raise ValueError("records must be in chronological order")

    def integral(name):
        vals = np.array([getattr(r, name) for r in records])
        return cumulative_trapezoid(vals, t, initial=0.0)

    cols = ["dissipation_grad", "dissipation_relax", "boundary_psi", "boundary_T5"]
    nonneg = all(getattr(r, c) >= 0 for r in records for c in cols)
    e_T = np.array([r.energy_T5 for r in records])
    e_psi = np.array([r.energy_psi2 for r in records])

    if regime is BCMode.TORUS:
        lhs = e_T + e_psi + 16.0 / 25.0 * integral("dissipation_grad") \
            + integral("dissipation_relax")
        rhs = np.full_like(lhs, e_T[0] + e_psi[0])
        return AuditResult(t, lhs, rhs, lhs - rhs, None, nonneg)

    lhs = 5.0 * e_T + 2.0 * e_psi + integral("dissipation_grad") \
        + integral("dissipation_relax") + integral("boundary_psi")
    if regime is BCMode.ROBIN:
        lhs = lhs + integral("boundary_T5")
    base = 5.0 * e_T[0] + 2.0 * e_psi[0]
    c_fit = _smallest_gronwall_constant(t - t[0], lhs, base, c_max)
    c_used = c_max if c_fit is None else c_fit
    rhs = c_used * np.exp(c_used * (t - t[0])) * base
    return AuditResult(t, lhs, rhs, lhs - rhs, c_fit, nonneg)


def _smallest_gronwall_constant(t, lhs, base, c_max):
    def ok(c):
        with np.errstate(over="ignore"):
            return np.all(lhs <= c * np.exp(c * t) * base * (1 + 1e-12))
    if ok(1.0):
        return 1.0
    if not ok(c_max):
        return None
    lo, hi = 1.0, c_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


# --------------------------------------------------------------------------
# finite differences on cell fields, ordinates (if any) in trailing axes

def _pad(f, axis, periodic):
    if periodic:
        return np.concatenate([np.take(f, [-1], axis=axis), f, np.take(f, [0], axis=axis)],
                              axis=axis)
    f0, f1, f2 = (np.take(f, [i], axis=axis) for i in (0, 1, 2))
    g0, g1, g2 = (np.take(f, [i], axis=axis) for i in (-1, -2, -3))
    # quadratic extrapolation: second-order one-sided differences at the walls
    return np.concatenate([3 * f0 - 3 * f1 + f2, f, 3 * g0 - 3 * g1 + g2], axis=axis)


def d1(f, grid: SpatialGrid, axis: int):
    p = _pad(f, axis, grid.periodic_per_axis[axis])
    n = f.shape[axis]
    hi = np.take(p, np.arange(2, n + 2), axis=axis)
    lo = np.take(p, np.arange(0, n), axis=axis)
    return (hi - lo) / (2.0 * grid.spacing[axis])


def d2(f, grid: SpatialGrid, axis: int):
    p = _pad(f, axis, grid.periodic_per_axis[axis])
    n = f.shape[axis]
    hi = np.take(p, np.arange(2, n + 2), axis=axis)
    lo = np.take(p, np.arange(0, n), axis=axis)
    return (hi - 2.0 * f + lo) / grid.spacing[axis] ** 2


def directional(f, quad: AngularQuadrature, grid: SpatialGrid):
    """``beta . grad f`` per ordinate; ``f`` may already carry an ordinate axis."""
    per_ordinate = f.ndim == grid.dim + 1
    out = 0.0
    for a in range(grid.dim):
        g = d1(f, grid, a)
        out = out + (g * quad.nodes[:, a] if per_ordinate else g[..., None] * quad.nodes[:, a])
    if np.isscalar(out):
        return np.zeros(grid.shape + (quad.size,))
    return out


def directional2(f, quad: AngularQuadrature, grid: SpatialGrid):
    """``beta . grad (beta . grad f)`` for a scalar cell field ``f``."""
    b = quad.nodes
    out = np.zeros(grid.shape + (quad.size,))
    for a in range(grid.dim):
        out += d2(f, grid, a)[..., None] * b[:, a] ** 2
        for c in range(a + 1, grid.dim):
            out += 2.0 * d1(d1(f, grid, a), grid, c)[..., None] * b[:, a] * b[:, c]
    return out


def interior_mask(grid: SpatialGrid) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for a in range(grid.dim):
        if not grid.periodic_per_axis[a]:
            idx = [slice(None)] * grid.dim
            idx[a] = [0, grid.cells_per_axis[a] - 1]
            mask[tuple(idx)] = False
    return mask


# --------------------------------------------------------------------------
# limit-temperature history and the corrected profile

@dataclass
class LimitHistory:
    times: np.ndarray
    temperatures: np.ndarray  # (K,) + grid.shape
    grid: SpatialGrid

    @classmethod
    def from_states(cls, states) -> "LimitHistory":
        states = list(states)
        return cls(np.array([s.time for s in states]),
                   np.stack([s.temperature for s in states]), states[0].grid)

    def __len__(self):
        return len(self.times)

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not stored in the limit history")
        return k

    def _window(self, k):
        K = len(self.times)
        if K < 2:
            raise ValueError("time derivatives need at least two stored time levels")
        k = k % K
        if K == 2:
            return [0, 1], k
        lo = min(max(k - 1, 0), K - 3)
        return [lo, lo + 1, lo + 2], k - lo

    def dt_T4(self, k: int) -> np.ndarray:
        """Time derivative of T^4 at level k: central inside, one-sided
        second-order at the ends (first order with only two levels)."""
        idx, j = self._window(k)
        f = self.temperatures[idx] ** 4
        return np.gradient(f, self.times[idx], axis=0, edge_order=len(idx) - 1)[j]

    def dtt_T4(self, k: int) -> np.ndarray:
        idx, _ = self._window(k)
        if len(idx) < 3:
            raise ValueError("second time derivative needs three stored levels")
        f = self.temperatures[idx] ** 4
        t = self.times[idx]
        h1, h2 = t[1] - t[0], t[2] - t[1]
        return 2.0 * ((f[2] - f[1]) / h2 - (f[1] - f[0]) / h1) / (h1 + h2)

    def dt_field(self, values: Sequence[np.ndarray], k: int) -> np.ndarray:
        """Time derivative at level k of an arbitrary per-level field
        sequence aligned with this history (same stencil as ``dt_T4``)."""
        idx, j = self._window(k)
        f = np.stack([values[i] for i in idx])
        return np.gradient(f, self.times[idx], axis=0, edge_order=len(idx) - 1)[j]


def corrected_psibar(history: LimitHistory, eps: float, quad: AngularQuadrature,
                     index: int = -1) -> np.ndarray:
    """``T^4 - eps b.grad T^4 - eps^2 d_t T^4 + eps^2 b.grad(b.grad T^4)``."""
    grid = history.grid
    f = history.temperatures[index] ** 4
    out = np.repeat(f[..., None], quad.size, axis=-1)
    if eps == 0:
        return out
    out -= eps * directional(f, quad, grid)
    out -= eps ** 2 * history.dt_T4(index)[..., None]
    out += eps ** 2 * directional2(f, quad, grid)
    return out


def remainder_Rbar(history: LimitHistory, eps: float, quad: AngularQuadrature,
                   index: int = -1, form: str = "closed") -> np.ndarray:
    """Defect left by the corrected profile in the kinetic equation.

    ``form="definition"``: ``d_t psibar + (1/eps) b.grad psibar + (psibar - T^4)/eps^2``.
    ``form="closed"``: its expansion
    ``eps (b.grad^3 T^4 - 2 b.grad d_t T^4) + eps^2 (b.grad^2 d_t T^4 - d_tt T^4)``.
    ``form="displayed"``: the variant
    ``eps b.grad(-2 d_t T^4 + b.grad^2 d_t T^4) - eps^2 (d_t T^4 - b.grad^2 d_t T^4)``
    kept for comparison; it is not consistent with the definition.
    """
    grid = history.grid
    K = len(history)
    k = index % K
    if form == "definition":
        if K < 3:
            raise ValueError("the defining residual needs three stored levels")
        idx, _ = history._window(k)
        levels = {i: corrected_psibar(history, eps, quad, i) for i in idx}
        vals = [levels.get(i) for i in range(K)]
        dpsi = history.dt_field(vals, k)
        psib = levels[k]
        f = history.temperatures[k] ** 4
        return dpsi + directional(psib, quad, grid) / eps + (psib - f[..., None]) / eps ** 2

    f = history.temperatures[k] ** 4
    ft = history.dt_T4(k)
    D2ft = directional2(ft, quad, grid)
    if form == "closed":
        D3f = directional(directional2(f, quad, grid), quad, grid)
        return (eps * (D3f - 2.0 * directional(ft, quad, grid))
                + eps ** 2 * (D2ft - history.dtt_T4(k)[..., None]))
    if form == "displayed":
        return (eps * directional(-2.0 * ft[..., None] + D2ft, quad, grid)
                - eps ** 2 * (ft[..., None] - D2ft))
    raise ValueError(f"unknown form {form!r}")


def expansion_residual(state: KineticState, history: LimitHistory, eps: float, order: int,
                       quad: AngularQuadrature, index: Optional[int] = None) -> float:
    """Sup over interior cells/ordinates of psi minus the truncated expansion."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    grid = history.grid
    k = history.index_of(state.time) if index is None else index
    f = history.temperatures[k] ** 4
    approx = np.repeat(f[..., None], quad.size, axis=-1)
    if order >= 1:
        approx = approx - eps * directional(f, quad, grid)
    if order >= 2:
        approx = approx - eps ** 2 * (history.dt_T4(k)[..., None]
                                      - directional2(f, quad, grid))
    diff = np.abs(state.intensity - approx)[interior_mask(grid)]
    return float(diff.max()) if diff.size else 0.0


# --------------------------------------------------------------------------
# relative entropy

def relative_entropy(state: KineticState, Tbar: np.ndarray, psibar: np.ndarray,
                     quad: AngularQuadrature, grid: Optional[SpatialGrid] = None) -> EntropyRecord:
    grid = state.grid if grid is None else grid
    Tbar = np.asarray(Tbar, float)
    psibar = np.asarray(psibar, float)
    if Tbar.shape != state.temperature.shape or psibar.shape != state.intensity.shape:
        raise ValueError("kinetic and limit fields live on different grids or quadratures")
    T = state.temperature
    g = T - Tbar
    h_T = (T ** 5 - Tbar ** 5 - 5.0 * Tbar ** 4 * g) / 5.0
    sq = ((state.intensity - psibar) ** 2) @ quad.weights
    vol = grid.cell_volume

    def pack(mask):
        parts = (vol * float(np.sum(h_T[mask])), vol * float(np.sum(sq[mask])) / 2.0,
                 vol * float(np.sum(g[mask] ** 4)), vol * float(np.sum(sq[mask])))
        return parts

    full = np.ones(grid.shape, dtype=bool)
    hT, hpsi, l4, l2 = pack(full)
    rec = EntropyRecord(state.time, hT + hpsi, hT, hpsi, l4, l2)
    if not grid.fully_periodic:
        ihT, ihpsi, il4, il2 = pack(interior_mask(grid))
        rec.interior = {"H": ihT + ihpsi, "H_T_part": ihT, "H_psi_part": ihpsi,
                        "error_L4_4": il4, "error_L2_2": il2}
    return rec


def lmtg_check(A, g, c):
    """Check ``(A+g)^5 - A^5 - 5 A^4 g >= c^3 g^2 + c g^4``.

    Returns ``(passed, margin)``, elementwise for array input.
    """
    A = np.asarray(A, float)
    g = np.asarray(g, float)
    c = np.asarray(c, float)
    if np.any(c <= 0):
        raise ValueError("lmtg_check needs c > 0")
    if np.any(A < c):
        raise ValueError("lmtg_check needs A >= c")
    if np.any(A + g < 0):
        raise ValueError("lmtg_check needs A + g >= 0")
    # expanded form avoids cancellation in (A+g)^5 - A^5 - 5 A^4 g
    lhs = 10 * A ** 3 * g ** 2 + 10 * A ** 2 * g ** 3 + 5 * A * g ** 4 + g ** 5
    rhs = c ** 3 * g ** 2 + c * g ** 4
    margin = lhs - rhs
    passed = margin >= -1e-12 * np.maximum(1.0, np.abs(lhs))
    if passed.ndim == 0:
        return bool(passed), float(margin)
    return passed, margin


# --------------------------------------------------------------------------
# rates

def fit_rate(pairs):
    """Least-squares line through ``(log eps, log error)``.

    Returns ``(slope, intercept, r_squared)``.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("fit_rate needs at least three (eps, error) pairs")
    x = np.array([p[0] for p in pairs], float)
    y = np.array([p[1] for p in pairs], float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("fit_rate needs positive eps and error values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def gronwall_constant(series, s: float, c_max: float = 1e3):
    """Smallest ``C`` with ``H(t) <= (H(0) + C eps^s) e^{C t}`` on every series.

    ``series`` maps epsilon to ``(times, H values)``; returns ``None`` if
    no ``C <= c_max`` works.
    """
    def ok(c):
        for eps, (t, H) in series.items():
            t = np.asarray(t) - t[0]
            H = np.asarray(H)
            with np.errstate(over="ignore"):
                bound = (H[0] + c * eps ** s) * np.exp(c * t) * (1 + 1e-12)
            if np.any(H > bound):
                return False
        return True
    if ok(0.0):
        return 0.0
    if not ok(c_max):
        return None
    lo, hi = 0.0, c_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
        if hi - lo <= 1e-12 * hi:
            break
    return hi

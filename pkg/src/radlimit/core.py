"""Shared domain types: parameters, box/torus grids, boundary data and state.

Field storage convention
------------------------
Temperature is an array of shape ``grid.shape``. Intensity is an array of
shape ``grid.shape + (n_ordinates,)``, C-contiguous, so the ordinates of a
cell are adjacent in memory.

For ``dim < 3`` the fields are constant along the suppressed axes while the
direction variable still lives on the full unit sphere. Volumes and face
areas are measured in the ``dim`` resolved axes only (suppressed axes have
unit length).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class BCMode(str, enum.Enum):
    TORUS = "torus"
    DIRICHLET = "dirichlet"
    ROBIN = "robin"

    @classmethod
    def parse(cls, value) -> "BCMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown bc_mode {value!r}; expected one of "
                             f"{[m.value for m in cls]}") from None


# Physical constants k = kappa = h_c = c = 1 and sigma = pi are built into
# the equations and deliberately not stored.
@dataclass(frozen=True)
class Params:
    epsilon: float
    alpha: float = 0.5
    robin_r: float = 1.0
    bc_mode: BCMode = BCMode.TORUS

    def __post_init__(self):
        object.__setattr__(self, "bc_mode", BCMode.parse(self.bc_mode))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.robin_r >= 0:
            raise ValueError(f"robin_r must be >= 0, got {self.robin_r}")

    def replace(self, **changes) -> "Params":
        values = dict(epsilon=self.epsilon, alpha=self.alpha,
                      robin_r=self.robin_r, bc_mode=self.bc_mode)
        values.update(changes)
        return Params(**values)


@dataclass(frozen=True)
class Face:
    """One side of a non-periodic axis.

    ``cells`` indexes the boundary-adjacent cells in the flattened grid and
    has the face shape (the grid shape with ``axis`` removed); ``points``
    holds the matching face-centre coordinates, shape ``cells.shape + (dim,)``.
    """

    axis: int
    side: int  # 0: low end, outward normal -e_axis; 1: high end, +e_axis
    cells: np.ndarray = field(compare=False, repr=False)
    points: np.ndarray = field(compare=False, repr=False)
    area: float = 1.0

    @property
    def normal(self) -> np.ndarray:
        n = np.zeros(3)
        n[self.axis] = 1.0 if self.side == 1 else -1.0
        return n

    @property
    def name(self) -> str:
        return "xyz"[self.axis] + ("+" if self.side == 1 else "-")


@dataclass(frozen=True)
class SpatialGrid:
    dim: int
    cells_per_axis: tuple
    extent_per_axis: tuple
    periodic_per_axis: tuple

    @property
    def shape(self) -> tuple:
        return tuple(self.cells_per_axis)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def spacing(self) -> np.ndarray:
        return np.asarray(self.extent_per_axis, float) / np.asarray(self.cells_per_axis)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def fully_periodic(self) -> bool:
        return all(self.periodic_per_axis)

    def centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.cells_per_axis[axis]) + 0.5) * self.spacing[axis]

    def mesh(self) -> list:
        """Cell-centre coordinate arrays, one per axis, each of ``shape``."""
        return np.meshgrid(*[self.centers(a) for a in range(self.dim)], indexing="ij")

    def face_area(self, axis: int) -> float:
        dx = self.spacing
        return float(np.prod([dx[b] for b in range(self.dim) if b != axis]))

    def boundary_faces(self) -> list:
        faces = []
        flat = np.arange(self.n_cells).reshape(self.shape)
        coords = self.mesh()
        for axis in range(self.dim):
            if self.periodic_per_axis[axis]:
                continue
            for side in (0, 1):
                index = 0 if side == 0 else self.cells_per_axis[axis] - 1
                cells = np.take(flat, index, axis=axis)
                pts = np.stack([np.take(c, index, axis=axis) for c in coords], axis=-1)
                pts[..., axis] = 0.0 if side == 0 else self.extent_per_axis[axis]
                faces.append(Face(axis, side, cells, pts, self.face_area(axis)))
        return faces

    def check_bc_mode(self, mode: BCMode) -> None:
        mode = BCMode.parse(mode)
        if mode is BCMode.TORUS and not self.fully_periodic:
            raise ValueError("torus mode requires every axis to be periodic")
        if mode is not BCMode.TORUS and any(self.periodic_per_axis):
            raise ValueError(f"{mode.value} mode requires every axis to be non-periodic")


def make_grid(dim: int, cells_per_axis: Sequence[int], extent_per_axis: Sequence[float],
              periodic_per_axis: Sequence[bool]) -> SpatialGrid:
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    cells = tuple(int(c) for c in cells_per_axis)
    extent = tuple(float(e) for e in extent_per_axis)
    periodic = tuple(bool(p) for p in periodic_per_axis)
    if not (len(cells) == len(extent) == len(periodic) == dim):
        raise ValueError(f"per-axis lists must all have length dim={dim}")
    if any(c < 2 for c in cells):
        raise ValueError(f"every axis needs at least 2 cells, got {cells}")
    if any(not e > 0 for e in extent):
        raise ValueError(f"extents must be positive, got {extent}")
    return SpatialGrid(dim, cells, extent, periodic)


BoundaryFn = Callable[[float, np.ndarray], np.ndarray]
PsiBoundaryFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class BoundaryData:
    """Boundary temperature and incoming-intensity data.

    ``t_boundary(t, points)`` maps face points of shape ``(..., dim)`` to
    temperatures of shape ``(...)``; ``psi_boundary(t, points, nodes)`` maps
    them and the ordinate directions ``(nq, 3)`` to intensities
    ``(..., nq)``.
    """

    t_boundary: BoundaryFn
    psi_boundary: PsiBoundaryFn
    well_prepared: bool = False

    def check(self, points: np.ndarray, nodes: np.ndarray, t: float = 0.0) -> None:
        tb = np.asarray(self.t_boundary(t, points), float)
        if np.any(tb <= 0):
            raise ValueError("boundary temperature must be positive")
        if self.well_prepared:
            psib = np.asarray(self.psi_boundary(t, points, nodes), float)
            # a few ulps of slack: T_b**4 may be formed by pow or by repeated products
            if not np.allclose(psib, np.broadcast_to((tb ** 4)[..., None], psib.shape),
                               rtol=4 * np.finfo(float).eps, atol=0.0):
                raise ValueError("well_prepared boundary data must satisfy psi_b = T_b**4")


def constant_boundary(t_b: float, psi_b: Optional[float] = None) -> BoundaryData:
    """Constant boundary data; ``psi_b=None`` gives the well-prepared choice."""
    if not t_b > 0:
        raise ValueError(f"boundary temperature must be positive, got {t_b}")
    t_b = float(t_b)
    well = psi_b is None
    psi_value = t_b ** 4 if well else float(psi_b)

    def t_fn(t, points):
        return np.full(np.shape(points)[:-1], t_b)

    def psi_fn(t, points, nodes):
        return np.full(np.shape(points)[:-1] + (len(nodes),), psi_value)

    return BoundaryData(t_fn, psi_fn, well_prepared=well)


def face_boundary(values: dict, extent: Sequence[float],
                  psi_values: Optional[dict] = None) -> BoundaryData:
    """Piecewise-constant data keyed by face name (``"x-"``, ``"x+"``, ...).

    ``psi_values=None`` gives well-prepared intensities ``T_b**4``.
    """
    values = {k: float(v) for k, v in values.items()}
    extent = [float(e) for e in extent]
    well = psi_values is None
    psi_values = ({k: v ** 4 for k, v in values.items()} if well
                  else {k: float(v) for k, v in psi_values.items()})

    def lookup(table, points):
        points = np.asarray(points, float)
        out = np.full(points.shape[:-1], np.nan)
        for key, v in table.items():
            axis = "xyz".index(key[0])
            if axis >= points.shape[-1]:
                continue
            wall = 0.0 if key[1] == "-" else extent[axis]
            out[np.abs(points[..., axis] - wall) <= 1e-12 * max(1.0, wall)] = v
        if np.any(np.isnan(out)):
            raise KeyError("boundary point on a face without tabulated data")
        return out

    def t_fn(t, points):
        return lookup(values, points)

    def psi_fn(t, points, nodes):
        base = lookup(psi_values, points)
        return np.repeat(base[..., None], len(nodes), axis=-1)

    return BoundaryData(t_fn, psi_fn, well_prepared=well)


@dataclass
class KineticState:
    time: float
    temperature: np.ndarray
    intensity: np.ndarray
    grid: SpatialGrid

    def __post_init__(self):
        self.temperature = np.ascontiguousarray(self.temperature, dtype=float)
        self.intensity = np.ascontiguousarray(self.intensity, dtype=float)
        if self.temperature.shape != self.grid.shape:
            raise ValueError(f"temperature shape {self.temperature.shape} does not match "
                             f"grid {self.grid.shape}")
        if self.intensity.shape[:-1] != self.grid.shape:
            raise ValueError(f"intensity shape {self.intensity.shape} does not match "
                             f"grid {self.grid.shape}")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    @property
    def n_ordinates(self) -> int:
        return self.intensity.shape[-1]

    def copy(self) -> "KineticState":
        return KineticState(self.time, self.temperature.copy(), self.intensity.copy(),
                            self.grid)


def well_prepared_init(T0, grid: SpatialGrid, n_ordinates: int, time: float = 0.0) -> KineticState:
    """State with ``psi = T0**4`` at every ordinate."""
    T0 = np.asarray(T0, dtype=float)
    if T0.shape != grid.shape:
        raise ValueError(f"T0 shape {T0.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(T0)):
        raise ValueError("T0 must be finite")
    if np.any(T0 < 0):
        raise ValueError("T0 must be nonnegative")
    psi = np.repeat((T0 ** 4)[..., None], n_ordinates, axis=-1)
    return KineticState(time, T0.copy(), psi, grid)

"""Second-order cell-centred Laplacian with ghost-cell boundary closures.

Both the kinetic diffusion sub-step and the limit solver build their
operator here so that spatial discretisations agree exactly.

A ghost value behind a wall is an affine function of the adjacent interior
value ``X_in`` and the boundary datum ``b``:

* Dirichlet: ``X_ghost = 2 b - X_in`` (face value equals ``b``)
* Robin ``eps^r n.grad X = b - X``, discretised with the face-centred value
  ``(X_ghost + X_in) / 2``:
  ``X_ghost = (b + X_in (kappa - 1/2)) / (kappa + 1/2)`` with ``kappa = eps^r / dx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .core import SpatialGrid


def ghost_coefficients(kind: str, dx: float, eps_r: float = 0.0):
    """Return ``(c_in, c_b)`` with ``X_ghost = c_in X_in + c_b b``."""
    if kind == "dirichlet":
        return -1.0, 2.0
    if kind == "robin":
        kappa = eps_r / dx
        return (kappa - 0.5) / (kappa + 0.5), 1.0 / (kappa + 0.5)
    raise ValueError(f"unknown boundary kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Laplacian:
    matrix: sp.csr_matrix
    faces: tuple
    c_in: tuple
    c_b: tuple
    grid: SpatialGrid

    def boundary_vector(self, face_values) -> np.ndarray:
        """Constant part contributed by the boundary data, one array per face."""
        out = np.zeros(self.grid.n_cells)
        for face, cb, vals in zip(self.faces, self.c_b, face_values):
            dx = self.grid.spacing[face.axis]
            np.add.at(out, face.cells.ravel(), cb * np.ravel(vals) / dx ** 2)
        return out

    def ghosts(self, values: np.ndarray, face_values) -> list:
        """Ghost values behind each face for a cell field ``values``."""
        flat = np.ravel(values)
        return [ci * flat[f.cells] + cb * np.asarray(b)
                for f, ci, cb, b in zip(self.faces, self.c_in, self.c_b, face_values)]

    def apply(self, values: np.ndarray, face_values=()) -> np.ndarray:
        out = self.matrix @ np.ravel(values)
        if self.faces:
            out = out + self.boundary_vector(face_values)
        return out.reshape(self.grid.shape)


def _axis_matrix(n: int, dx: float, periodic: bool, c_lo: float, c_hi: float):
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    mat = sp.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="lil")
    if periodic:
        mat[0, n - 1] += 1.0
        mat[n - 1, 0] += 1.0
    else:
        mat[0, 0] += c_lo
        mat[n - 1, n - 1] += c_hi
    return (mat / dx ** 2).tocsr()


@lru_cache(maxsize=64)
def build_laplacian(grid: SpatialGrid, kind: str = "periodic", eps_r: float = 0.0) -> Laplacian:
    """Assemble the operator; ``kind`` is "periodic", "dirichlet" or "robin"."""
    faces = tuple(grid.boundary_faces())
    if kind == "periodic" and faces:
        raise ValueError("periodic Laplacian requested on a grid with walls")
    dx = grid.spacing
    coeff = {}
    for f in faces:
        coeff[(f.axis, f.side)] = ghost_coefficients(kind, dx[f.axis], eps_r)
    total = sp.csr_matrix((grid.n_cells, grid.n_cells))
    for a in range(grid.dim):
        c_lo = coeff.get((a, 0), (0.0, 0.0))[0]
        c_hi = coeff.get((a, 1), (0.0, 0.0))[0]
        block = _axis_matrix(grid.cells_per_axis[a], dx[a], grid.periodic_per_axis[a], c_lo, c_hi)
        left = sp.identity(int(np.prod(grid.cells_per_axis[:a])), format="csr")
        right = sp.identity(int(np.prod(grid.cells_per_axis[a + 1:])), format="csr")
        total = total + sp.kron(sp.kron(left, block), right, format="csr")
    total.sort_indices()
    return Laplacian(total.tocsr(), faces,
                     tuple(coeff[(f.axis, f.side)][0] for f in faces),
                     tuple(coeff[(f.axis, f.side)][1] for f in faces), grid)

"""Discrete-ordinates product quadrature on the unit sphere.

Gauss-Legendre in the polar cosine times a uniform midpoint rule in
azimuth. With an even azimuth count the rule is closed under reflection
across the three coordinate planes, so specular reflection at box walls
is an exact node permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * np.pi


# eq=False: instances hash by identity so per-rule tables can be cached
@dataclass(frozen=True, eq=False)
class AngularQuadrature:
    nodes: np.ndarray = field(repr=False)    # (nq, 3) unit vectors
    weights: np.ndarray = field(repr=False)  # (nq,)
    n_polar: int = 0
    n_azimuth: int = 0

    @property
    def size(self) -> int:
        return len(self.weights)

    def __len__(self):
        return self.size

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def moment_errors(self) -> dict:
        """Deviations of the zeroth, first and second moments from exact values."""
        w, b = self.weights, self.nodes
        return {
            "zeroth": abs(np.sum(w) - FOUR_PI),
            "first": np.abs(w @ b),
            "second": np.abs(np.einsum("q,qi,qj->ij", w, b, b) - FOUR_PI / 3.0 * np.eye(3)),
        }


def build_quadrature(n_polar: int = 8, n_azimuth: int = 8) -> AngularQuadrature:
    if n_polar < 2:
        raise ValueError(f"n_polar must be >= 2, got {n_polar}")
    if n_azimuth < 4:
        raise ValueError(f"n_azimuth must be >= 4, got {n_azimuth}")
    if n_azimuth % 2:
        raise ValueError(f"n_azimuth must be even for exact specular reflection, got {n_azimuth}")

    mu, w_mu = np.polynomial.legendre.leggauss(n_polar)
    dphi = 2.0 * np.pi / n_azimuth
    phi = (np.arange(n_azimuth) + 0.5) * dphi

    sin_theta = np.sqrt(1.0 - mu ** 2)
    nodes = np.empty((n_polar, n_azimuth, 3))
    nodes[..., 0] = sin_theta[:, None] * np.cos(phi)[None, :]
    nodes[..., 1] = sin_theta[:, None] * np.sin(phi)[None, :]
    nodes[..., 2] = mu[:, None]
    nodes = nodes.reshape(-1, 3)
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]

    weights = np.repeat(w_mu * dphi, n_azimuth)
    weights *= FOUR_PI / weights.sum()
    return AngularQuadrature(nodes, weights, n_polar, n_azimuth)


def angular_average(psi, quad: AngularQuadrature):
    """Angular integral sum_q w_q psi_q over the last axis of ``psi``."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape[-1] != quad.size:
        raise ValueError(f"expected {quad.size} ordinate values, got {psi.shape[-1]}")
    return psi @ quad.weights


def angular_flux(psi, quad: AngularQuadrature) -> np.ndarray:
    """First moment sum_q w_q psi_q beta_q; callers apply any 1/epsilon."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape[-1] != quad.size:
        raise ValueError(f"expected {quad.size} ordinate values, got {psi.shape[-1]}")
    return psi @ (quad.weights[:, None] * quad.nodes)


def reflect(beta, n) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(beta) - 1.0) > 1e-10 or abs(np.linalg.norm(n) - 1.0) > 1e-10:
        raise ValueError("reflect expects unit vectors")
    return beta - 2.0 * np.dot(n, beta) * n


def reflection_map(quad: AngularQuadrature, n) -> np.ndarray:
    """Permutation ``perm`` with ``nodes[perm[q]] == reflect(nodes[q], n)``.

    Only the six axis-aligned normals are supported.
    """
    n = np.asarray(n, dtype=float)
    axis = np.flatnonzero(n)
    if len(axis) != 1 or abs(abs(n[axis[0]]) - 1.0) > 1e-14:
        raise ValueError(f"reflection_map supports axis-aligned normals only, got {n}")
    mirrored = quad.nodes.copy()
    mirrored[:, axis[0]] *= -1.0
    dist = np.linalg.norm(quad.nodes[None, :, :] - mirrored[:, None, :], axis=-1)
    perm = np.argmin(dist, axis=1)
    if np.max(dist[np.arange(quad.size), perm]) > 1e-12 or \
            len(np.unique(perm)) != quad.size:
        raise ValueError("quadrature is not closed under this reflection")
    return perm

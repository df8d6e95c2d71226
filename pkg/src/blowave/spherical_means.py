"""Spherical means over the unit sphere by a Gauss-Legendre x uniform product rule."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .radial_fields import NonFiniteValueError, RadialGrid, RadialProfile


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Product rule: Gauss-Legendre in cos(theta), uniform midpoints in phi.

    ``nodes`` has shape (n_theta*n_phi, 3) and ``weights`` sums to 4*pi.
    """

    n_theta: int
    n_phi: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size


@lru_cache(maxsize=16)
def sphere_quadrature(n_theta: int = 32, n_phi: int = 64) -> SphereQuadrature:
    if n_theta < 1 or n_phi < 1:
        raise ValueError("quadrature resolution must be positive")
    mu, w_mu = np.polynomial.legendre.leggauss(n_theta)
    phi = (np.arange(n_phi) + 0.5) * (2 * np.pi / n_phi)
    sin_t = np.sqrt(1.0 - mu**2)
    nodes = np.stack(
        [
            np.outer(sin_t, np.cos(phi)).ravel(),
            np.outer(sin_t, np.sin(phi)).ravel(),
            np.repeat(mu, n_phi),
        ],
        axis=-1,
    )
    weights = np.repeat(w_mu, n_phi) * (2 * np.pi / n_phi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SphereQuadrature(n_theta, n_phi, nodes, weights)


DEFAULT_QUADRATURE = sphere_quadrature()
_CHUNK_POINTS = 1 << 18


def _means(f, centers: np.ndarray, radii: np.ndarray, quad: SphereQuadrature) -> np.ndarray:
    # centers (..., 3), radii broadcastable to centers[..., 0]; negative radii are allowed
    # internally (the sphere is symmetric, so M(-r) = M(r)).
    centers = np.asarray(centers, dtype=float)
    radii = np.asarray(radii, dtype=float)
    shape = np.broadcast_shapes(centers.shape[:-1], radii.shape)
    c = np.broadcast_to(centers, shape + (3,)).reshape(-1, 3)
    rr = np.broadcast_to(radii, shape).reshape(-1)
    out = np.empty(rr.size)
    chunk = max(1, _CHUNK_POINTS // quad.size)
    for lo in range(0, rr.size, chunk):
        sl = slice(lo, lo + chunk)
        pts = c[sl, None, :] + rr[sl, None, None] * quad.nodes
        vals = np.broadcast_to(np.asarray(f(pts), dtype=float), pts.shape[:-1])
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise NonFiniteValueError(
                f"f is not finite at sphere node {int(bad[1])} "
                f"(point {pts[bad[0], bad[1]].tolist()})", int(bad[1]))
        out[sl] = vals @ quad.weights / (4 * np.pi)
    return out.reshape(shape)


def spherical_mean(f, x0, r: float, quad: SphereQuadrature = DEFAULT_QUADRATURE) -> float:
    """Mean of ``f`` over the sphere of radius ``r`` about ``x0``.

    ``f`` must accept an array of points of shape (..., 3) and return
    values of shape (...).
    """
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    return float(_means(f, np.asarray(x0, float), np.asarray(r, float), quad))


def mean_profile(f, x0, grid: RadialGrid,
                 quad: SphereQuadrature = DEFAULT_QUADRATURE) -> RadialProfile:
    x0 = np.asarray(x0, dtype=float)
    return RadialProfile(grid, _means(f, x0, grid.r, quad))


def radial_to_cartesian(g):
    """Lift a radial function g(|x|) to a function of points x in R^3."""
    def f(x):
        return g(np.linalg.norm(x, axis=-1))
    return f

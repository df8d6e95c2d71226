"""Uniform radial grids, sampled profiles and (t, r) fields.

Everything here is an immutable value object plus a handful of pure
derivative/quadrature helpers that the solvers share.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np


class NonFiniteValueError(ValueError):
    """A sampled function produced NaN/inf at some node."""

    def __init__(self, message: str, index):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError(f"n_points must be >= 3, got {self.n_points}")
        if not self.r_max > 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")

    @property
    def h(self) -> float:
        return self.r_max / (self.n_points - 1)

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.n_points)

    @classmethod
    def from_spacing(cls, r_max: float, h: float) -> "RadialGrid":
        n = int(round(r_max / h)) + 1
        return cls(h * (n - 1), n)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} values, got shape {vals.shape}")
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise NonFiniteValueError(
                f"non-finite profile value at node {bad[0]}", int(bad[0]))
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def __add__(self, other: "RadialProfile") -> "RadialProfile":
        _same_grid(self, other)
        return RadialProfile(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialProfile") -> "RadialProfile":
        _same_grid(self, other)
        return RadialProfile(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "RadialProfile":
        return RadialProfile(self.grid, c * self.values)

    __rmul__ = __mul__

    def to_csv(self, header: str = "r,value") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header.split(","))
        for r, v in zip(self.r, self.values):
            w.writerow([repr(float(r)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RadialProfile":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        r = np.array([float(a) for a, _ in rows])
        v = np.array([float(b) for _, b in rows])
        grid = RadialGrid(float(r[-1]), len(r))
        if not np.allclose(r, grid.r, rtol=0, atol=1e-12 * max(1.0, grid.r_max)):
            raise ValueError("CSV radii do not form a uniform grid starting at 0")
        return cls(grid, v)


def _same_grid(a: RadialProfile, b: RadialProfile) -> None:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


class Represents(str, Enum):
    U = "u"
    V = "v_equals_r_times_u"


@dataclass(frozen=True, eq=False)
class SpacetimeField:
    """Stored slices of a radial solution on a rectangular (t, r) lattice.

    ``values[i]`` is the slice at ``times[i] = t_start + i*dt``.  When
    ``rates`` is present it holds the time derivative of the same quantity
    on the same slices (the solvers record it so that diagnostics do not
    have to difference decimated output).  ``last_valid`` marks the final
    trustworthy slice after a blow-up stop.
    """

    t_start: float
    dt: float
    grid: RadialGrid
    values: np.ndarray
    represents: Represents = Represents.V
    rates: Optional[np.ndarray] = None
    last_valid: Optional[int] = None
    solver_dt: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != self.grid.n_points:
            raise ValueError(f"values must have shape (n_t, {self.grid.n_points})")
        stop = vals.shape[0] if self.last_valid is None else self.last_valid + 1
        if not np.all(np.isfinite(vals[:stop])):
            raise NonFiniteValueError("non-finite field value before last_valid", None)
        object.__setattr__(self, "values", vals)
        if self.rates is not None:
            object.__setattr__(self, "rates", np.asarray(self.rates, dtype=float))
        step = self.solver_dt if self.solver_dt is not None else self.dt
        if step / self.grid.h > 1 + 1e-12:
            raise ValueError("step ratio dt/h exceeds 1")

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def time_index(self, t: float) -> int:
        i = int(round((t - self.t_start) / self.dt))
        if i < 0 or i >= self.n_times or abs(self.times[i] - t) > 1e-9 * max(1, abs(t)):
            raise ValueError(f"t={t} is not a stored slice")
        return i

    def u_values(self) -> np.ndarray:
        """Slices of u (dividing v by r where needed)."""
        return _to_u(self.values, self.grid, self.represents)

    def ut_values(self) -> np.ndarray:
        """Slices of d_t u, from stored rates or centered differences."""
        if self.rates is not None:
            return _to_u(self.rates, self.grid, self.represents)
        u = self.u_values()
        return np.gradient(u, self.dt, axis=0, edge_order=2)

    def to_csv(self, decimate: int = 1) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "r", "value"])
        r = self.grid.r
        for i in range(0, self.n_times, decimate):
            t = repr(float(self.times[i]))
            for rj, vj in zip(r, self.values[i]):
                w.writerow([t, repr(float(rj)), repr(float(vj))])
        return buf.getvalue()


def _to_u(arr: np.ndarray, grid: RadialGrid, rep: Represents) -> np.ndarray:
    if rep is Represents.U:
        return np.array(arr, copy=True)
    r = grid.r
    out = np.empty_like(arr)
    out[..., 1:] = arr[..., 1:] / r[1:]
    out[..., 0] = center_value(arr, grid.h)
    return out


def center_value(v: np.ndarray, h: float) -> np.ndarray:
    """u(0) from v = r*u using the odd expansion v = a r + b r^3."""
    return (8.0 * v[..., 1] - v[..., 2]) / (6.0 * h)


def sample_function(f: Callable[[np.ndarray], np.ndarray], grid: RadialGrid) -> RadialProfile:
    vals = np.asarray(f(grid.r), dtype=float)
    if vals.shape == ():
        vals = np.full(grid.n_points, float(vals))
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise NonFiniteValueError(
            f"f is not finite at node {bad[0]} (r={grid.r[bad[0]]})", int(bad[0]))
    return RadialProfile(grid, vals)


def radial_derivative(p: RadialProfile, order: int = 1) -> RadialProfile:
    f = p.values
    h = p.grid.h
    n = f.size
    d = np.empty_like(f)
    if order == 1:
        d[1:-1] = (f[2:] - f[:-2]) / (2 * h)
        d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
        d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    elif order == 2:
        if n < 5:
            raise ValueError("second derivative needs at least 5 nodes")
        d[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
        d[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
        d[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return RadialProfile(p.grid, d)


def weighted_l2(p: RadialProfile) -> float:
    """Trapezoid value of the integral of f^2 * 4 pi r^2 over [0, r_max]."""
    r = p.r
    return float(np.trapezoid(p.values**2 * 4.0 * np.pi * r**2, r))


def cumulative_trapezoid(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out

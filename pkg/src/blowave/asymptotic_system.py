"""Closed-form solution of the asymptotic equation 2 U_sq + U_q^2 = 0.

Data are prescribed as A(q, omega) = U_q(0, q, omega), with the
normalisation U -> 0 as q -> -infinity.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .data import Datum

log = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3
TAIL_TOL = 1e-3


class BlowupReached(ArithmeticError):
    """The closed-form denominator A*s + 2 vanished (or changed sign)."""

    def __init__(self, s, q, omega=None):
        super().__init__(f"asymptotic profile blows up at s={s}, q={q}")
        self.s = s
        self.q = q
        self.omega = omega


class SignCertificate(str, Enum):
    NONNEGATIVE = "Nonnegative"
    MIXED_SIGN = "MixedSign"


@dataclass(frozen=True)
class AsymptoticData:
    """Scattering datum A(q, omega).

    ``A`` is called as ``A(q, omega)`` with ``omega`` either None (radial
    mode) or a unit vector; it must be vectorised in ``q``.  Either
    ``support_radius`` is finite (A = 0 for |q| >= R) or ``gamma`` gives
    the decay A = O(<q>^-gamma).
    """

    A: Callable
    support_radius: float = math.inf
    gamma: Optional[float] = None
    amplitude: float = 1.0
    label: str = "custom"
    lattice: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if math.isinf(self.support_radius) and (self.gamma is None or self.gamma <= 1):
            raise ValueError("non-compact asymptotic data need a decay exponent gamma > 1")
        if self.lattice is None:
            L = self.support_radius if math.isfinite(self.support_radius) else 50.0
            object.__setattr__(self, "lattice", np.linspace(-L, L, 4001))

    @classmethod
    def from_datum(cls, d: Datum) -> "AsymptoticData":
        return cls(lambda q, omega=None: d(q), support_radius=d.support_radius,
                   gamma=d.decay_exponent, amplitude=abs(d.params.get("a", 1.0)),
                   label=d.spec())

    def __call__(self, q, omega=None):
        return np.asarray(self.A(np.asarray(q, dtype=float), omega), dtype=float)

    @property
    def compact(self) -> bool:
        return math.isfinite(self.support_radius)

    @property
    def sign_certificate(self) -> SignCertificate:
        if np.min(self(self.lattice)) >= 0:
            return SignCertificate.NONNEGATIVE
        return SignCertificate.MIXED_SIGN

    def lower_limit(self, q_min: Optional[float] = None) -> float:
        """Lower end of the q-integral, logging the neglected tail for decaying data."""
        if self.compact:
            return -self.support_radius
        g = self.gamma
        if q_min is None:
            length = (self.amplitude / ((g - 1) * TAIL_TOL)) ** (1 / (g - 1))
            q_min = -max(10.0 * g, length)
        tail = self.amplitude * (1 + q_min**2) ** ((1 - g) / 2) / (g - 1)
        log.info("asymptotic quadrature starts at q=%g, tail bound %.3g", q_min, tail)
        return float(q_min)


def uq_closed_form(a, s):
    """U_q(s) = 2a / (a s + 2) for data value a = U_q(0)."""
    return 2.0 * a / (a * s + 2.0)


def solve_Uq(data: AsymptoticData, s, q, omega=None, tol: float = 1e-12):
    a = data(q, omega)
    s = np.asarray(s, dtype=float)
    denom = a * s + 2.0
    bad = denom <= tol
    if np.any(bad):
        idx = np.argwhere(np.broadcast_to(bad, denom.shape))[0] if denom.ndim else ()
        sb = np.broadcast_to(s, denom.shape)[tuple(idx)]
        qb = np.broadcast_to(np.asarray(q, float), denom.shape)[tuple(idx)]
        raise BlowupReached(float(sb), float(qb), omega)
    out = 2.0 * a / denom
    return out if np.ndim(out) else float(out)


def asymptotic_lifespan(data: AsymptoticData, lattice=None, omegas=None) -> float:
    """Slow-time lifespan 2/|min A| over the sample lattice, or +inf if A >= 0 there."""
    q = data.lattice if lattice is None else np.asarray(lattice, dtype=float)
    if q.size == 0:
        raise ValueError("empty lattice")
    if omegas is None:
        amin = float(np.min(data(q)))
    else:
        amin = min(float(np.min(data(q, w))) for w in omegas)
    return math.inf if amin >= 0 else 2.0 / abs(amin)


def _u_at_fixed_s(data, s, q, omega, step, q_min):
    lower = data.lower_limit(q_min)
    q = np.asarray(q, dtype=float)
    q_top = float(np.max(q)) if q.size else lower
    if data.compact:
        q_top = min(q_top, data.support_radius)
    n = max(1, int(math.ceil((q_top - lower) / step)))
    nodes = lower + step * np.arange(n + 1)
    f = solve_Uq(data, s, nodes, omega)
    cum = np.zeros(n + 1)
    cum[1:] = np.cumsum(0.5 * step * (f[1:] + f[:-1]))
    qc = np.clip(q, lower, q_top)
    j = np.clip(np.floor((qc - lower) / step).astype(np.int64), 0, n)
    fq = solve_Uq(data, s, qc, omega) if qc.size else qc
    out = cum[j] + 0.5 * (qc - nodes[j]) * (f[j] + fq)
    out = np.where(q <= lower, 0.0, out)
    return out


def integrate_U(data: AsymptoticData, s, q, omega=None, step: float = DEFAULT_STEP,
                q_min: Optional[float] = None):
    """Trapezoid value of U(s, q) = int_{-inf}^q 2A/(As + 2) d rho.

    ``s`` and ``q`` broadcast; each distinct s builds one cumulative table.
    Raises :class:`BlowupReached` if s is at or beyond the lifespan.
    """
    s_arr, q_arr = np.broadcast_arrays(np.asarray(s, float), np.asarray(q, float))
    out = np.empty(s_arr.shape)
    for sv in np.unique(s_arr):
        mask = s_arr == sv
        out[mask] = _u_at_fixed_s(data, float(sv), q_arr[mask], omega, step, q_min)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    s: np.ndarray
    values: np.ndarray
    residuals: np.ndarray

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "fit_range": [float(self.s[0]), float(self.s[-1])],
                "max_abs_residual": float(np.max(np.abs(self.residuals)))}


def fit_power_law(x, y) -> tuple[float, float, np.ndarray]:
    """Least-squares slope of log|y| against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float)))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept), ly - (slope * lx + intercept)


def decay_rate_U(data: AsymptoticData, q_fixed: float = None, s_min: float = 100.0,
                 s_max: float = 1000.0, n_s: int = 16, step: float = 1e-2,
                 q_min: Optional[float] = None) -> DecayFit:
    """Slope of log U(s, q_fixed) against log(1 + s) over [s_min, s_max]."""
    if not (s_min > 0 and s_max / s_min >= 10 - 1e-9):
        raise ValueError("decay fit needs at least a decade of s")
    if q_fixed is None:
        q_fixed = data.support_radius if data.compact else 0.0
    s = np.geomspace(s_min, s_max, n_s)
    U = np.array([integrate_U(data, sv, q_fixed, step=step, q_min=q_min) for sv in s])
    if np.all(U == 0):
        raise ValueError("decay rate is undefined for zero data")
    slope, icpt, res = fit_power_law(1 + s, U)
    return DecayFit(slope, icpt, s, U, res)


@dataclass(frozen=True, eq=False)
class AsymptoticProfile:
    s_grid: np.ndarray
    q_grid: np.ndarray
    U: np.ndarray
    Uq: np.ndarray
    lifespan: float
    omega: Optional[tuple] = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "q", "U", "U_q"])
        for i, s in enumerate(self.s_grid):
            for j, q in enumerate(self.q_grid):
                w.writerow([repr(float(s)), repr(float(q)),
                            repr(float(self.U[i, j])), repr(float(self.Uq[i, j]))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"lifespan": "inf" if math.isinf(self.lifespan) else self.lifespan,
                "s_range": [float(self.s_grid[0]), float(self.s_grid[-1])],
                "q_range": [float(self.q_grid[0]), float(self.q_grid[-1])],
                "max_U": float(np.max(self.U)) if self.U.size else 0.0}

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def asymptotic_profile(data: AsymptoticData, s_grid, q_grid, omega=None,
                       step: float = DEFAULT_STEP) -> AsymptoticProfile:
    """Sample U and U_q on s_grid x q_grid; slices at or past the lifespan are dropped."""
    s_grid = np.asarray(s_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    life = asymptotic_lifespan(data)
    keep = s_grid < life
    s_ok = s_grid[keep]
    U = np.array([integrate_U(data, s, q_grid, omega, step) for s in s_ok]).reshape(len(s_ok), len(q_grid))
    Uq = np.array([solve_Uq(data, s, q_grid, omega) for s in s_ok]).reshape(len(s_ok), len(q_grid))
    return AsymptoticProfile(s_ok, q_grid, U, Uq, life, None if omega is None else tuple(omega))

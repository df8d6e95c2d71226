"""Blow-up functionals evaluated on stored radial solutions.

beta(rho) = int_{-q}^{rho} sigma M[u](sigma - q, sigma)^2 d sigma   (q < -R, interior characteristic)
N(r)      = int_q^r rho M[u_t](rho - q, rho)^2 d rho               (q >= 0, witness characteristic)

Field values along a characteristic come from bilinear interpolation of
the stored (t, r) lattice.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .radial_fields import SpacetimeField, cumulative_trapezoid
from .spherical_means import DEFAULT_QUADRATURE, SphereQuadrature, _means


class Functional(str, Enum):
    JOHN_BETA = "JohnBeta"
    BERNHARDT_N = "BernhardtN"


@dataclass
class Trace:
    """Cumulative functional along a characteristic; ``truncated`` if it left the field."""

    x: np.ndarray
    values: np.ndarray
    truncated: bool
    name: str = "value"

    def to_csv(self, header: Optional[str] = None) -> str:
        lines = [header or f"r,{self.name}"]
        lines += [f"{a!r},{b!r}" for a, b in zip(self.x.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"


def bilinear(values: np.ndarray, t_start: float, dt: float, h: float, t, r) -> np.ndarray:
    """Bilinear interpolation of a (n_t, n_r) lattice; points must lie inside it."""
    t = np.asarray(t, float)
    r = np.asarray(r, float)
    n_t, n_r = values.shape
    x = (t - t_start) / dt
    y = r / h
    i = np.clip(np.floor(x).astype(np.int64), 0, n_t - 2)
    j = np.clip(np.floor(y).astype(np.int64), 0, n_r - 2)
    fx, fy = x - i, y - j
    return ((1 - fx) * (1 - fy) * values[i, j] + fx * (1 - fy) * values[i + 1, j]
            + (1 - fx) * fy * values[i, j + 1] + fx * fy * values[i + 1, j + 1])


def _clip_to_field(fld: SpacetimeField, s: np.ndarray, q: float):
    """Keep samples s whose point (s - q, s) lies inside the stored lattice."""
    t = s - q
    ok = (t >= fld.t_start - 1e-12) & (t <= fld.t_end + 1e-12) & (s <= fld.grid.r_max + 1e-12)
    if fld.last_valid is not None:
        ok &= t <= fld.t_start + fld.last_valid * fld.dt + 1e-12
    keep = np.flatnonzero(ok)
    if keep.size == 0:
        return s[:0], True
    stop = keep[-1] + 1 if np.all(ok[: keep[-1] + 1]) else int(np.argmin(ok))
    return s[:stop], stop < s.size


def _radial_means(fld: SpacetimeField, arr: np.ndarray, x0, t, s, quad):
    if np.allclose(x0, 0.0):
        return bilinear(arr, fld.t_start, fld.dt, fld.grid.h, t, s)
    x0 = np.asarray(x0, dtype=float)
    out = np.empty(s.shape)
    r_top = fld.grid.r_max
    for k, (tk, sk) in enumerate(zip(t, s)):
        def f(pts, tk=tk):
            rr = np.minimum(np.linalg.norm(pts, axis=-1), r_top)
            return bilinear(arr, fld.t_start, fld.dt, fld.grid.h, np.full(rr.shape, tk), rr)
        out[k] = _means(f, x0, np.asarray(sk), quad)
    return out


def beta_functional(fld: SpacetimeField, q: float, rho_grid, n_fine: int = 4001) -> Trace:
    """beta on ``rho_grid`` (all >= -q) along the characteristic r - t = q, q < 0."""
    if q >= 0:
        raise ValueError("beta uses an interior characteristic q < 0")
    rho_grid = np.asarray(rho_grid, float)
    if np.any(rho_grid < -q - 1e-12):
        raise ValueError("rho_grid must start at -q or later")
    s, trunc = _clip_to_field(fld, np.linspace(-q, rho_grid.max(), n_fine), q)
    u = fld.u_values()
    vals = bilinear(u, fld.t_start, fld.dt, fld.grid.h, s - q, s) if s.size else s
    cum = cumulative_trapezoid(s * vals**2, s) if s.size > 1 else np.zeros(s.size)
    rg = rho_grid[rho_grid <= (s[-1] if s.size else -np.inf) + 1e-12]
    return Trace(rg, np.interp(rg, s, cum) if rg.size else rg, trunc or rg.size < rho_grid.size,
                 "beta")


def beta_inequality_margins(trace: Trace, R: float, q: float) -> np.ndarray:
    """beta' - beta^2 / (4 (R - q)^2 rho) at interior samples."""
    if trace.x.size < 5:
        raise ValueError("need at least 5 samples")
    d = np.gradient(trace.values, trace.x, edge_order=2)
    rho = trace.x
    return (d - trace.values**2 / (4 * (R - q) ** 2 * rho))[1:-1]


def n_functional(fld: SpacetimeField, x0, q: float, r_grid,
                 quad: SphereQuadrature = DEFAULT_QUADRATURE, n_fine: int = 4001) -> Trace:
    """N on ``r_grid`` (all >= q) along r - t = q; off-center x0 lifts the radial field to 3D."""
    r_grid = np.asarray(r_grid, float)
    if np.any(r_grid < q - 1e-12):
        raise ValueError("r_grid must start at q or later")
    s, trunc = _clip_to_field(fld, np.linspace(q, r_grid.max(), n_fine), q)
    ut = fld.ut_values()
    m = _radial_means(fld, ut, x0, s - q, s, quad) if s.size else s
    cum = cumulative_trapezoid(s * m**2, s) if s.size > 1 else np.zeros(s.size)
    rg = r_grid[r_grid <= (s[-1] if s.size else -np.inf) + 1e-12]
    return Trace(rg, np.interp(rg, s, cum) if rg.size else rg, trunc or rg.size < r_grid.size, "N")


def blowup_radius_bound(N_r0: float, r0: float) -> float:
    """r* = r0 exp(4 / N(r0)); +inf when the exponential overflows."""
    if not N_r0 > 0:
        raise ValueError("N(r0) must be positive for a certificate")
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    x = 4.0 / N_r0
    return math.inf if x > 700 else r0 * math.exp(x)


@dataclass(frozen=True)
class MarginReport:
    r: np.ndarray
    margins: np.ndarray
    min_margin: float
    scale: float  # max |N'| over the samples, for relative tolerances


def ode_inequality_check(r, N) -> MarginReport:
    """N'(r) - N(r)^2/(4r) at interior samples (N' by second-order differences)."""
    r = np.asarray(r, float)
    N = np.asarray(N, float)
    if r.size < 5 or r.size != N.size:
        raise ValueError("need at least 5 matching (r, N) samples")
    d = np.gradient(N, r, edge_order=2)
    m = (d - N**2 / (4 * r))[1:-1]
    return MarginReport(r[1:-1], m, float(m.min()), float(np.max(np.abs(d))))


@dataclass(frozen=True)
class BlowupCertificate:
    functional: Functional
    x0: tuple
    q: float
    r0: float
    value_at_r0: float
    r_star: float
    ode_inequality_margin: float

    def __post_init__(self):
        if math.isfinite(self.r_star) and self.r_star < self.r0:
            raise ValueError("r_star must not be below r0")
        if math.isfinite(self.r_star) and not self.value_at_r0 > 0:
            raise ValueError("a finite r_star needs a positive functional value")

    def to_dict(self) -> dict:
        return {"functional": self.functional.value, "x0": list(self.x0), "q": self.q,
                "r0": self.r0, "value_at_r0": self.value_at_r0,
                "r_star": "inf" if math.isinf(self.r_star) else self.r_star,
                "ode_inequality_margin": (None if math.isnan(self.ode_inequality_margin)
                                          else self.ode_inequality_margin)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def bernhardt_certificate(fld: SpacetimeField, x0, q: float, r0: float, r_end: float,
                          n_samples: int = 200, best_r0: bool = True,
                          quad: SphereQuadrature = DEFAULT_QUADRATURE) -> tuple:
    """(certificate, N trace) from the witness (x0, q, r0), N sampled on [q, r_end].

    The bound holds from any starting radius at or beyond the witness r0, so
    with ``best_r0`` the certificate uses the sampled radius with the smallest r*.
    """
    if r0 < q:
        raise ValueError("r0 must not precede q")
    r = np.unique(np.concatenate([np.linspace(q, r_end, n_samples), [r0]]))
    tr = n_functional(fld, x0, q, r, quad)
    if tr.x.size == 0 or tr.x[-1] < r0:
        raise ValueError("field does not reach r0 along the characteristic")
    r_use = r0
    if best_r0:
        sel = (tr.x >= r0) & (tr.values > 0)
        if np.any(sel):
            with np.errstate(over="ignore"):
                stars = tr.x[sel] * np.exp(np.minimum(4.0 / tr.values[sel], 700.0))
            r_use = float(tr.x[sel][int(np.argmin(stars))])
    n_r0 = float(np.interp(r_use, tr.x, tr.values))
    r_star = blowup_radius_bound(n_r0, r_use) if n_r0 > 0 else math.inf
    sel = tr.x >= r0
    margin = ode_inequality_check(tr.x[sel], tr.values[sel]).min_margin if sel.sum() >= 5 else math.nan
    cert = BlowupCertificate(Functional.BERNHARDT_N, tuple(float(c) for c in x0), float(q),
                             float(r_use), n_r0, r_star, margin)
    return cert, tr


def measured_support_radius(values, r, tol: float = 1e-12) -> float:
    """Smallest R with |data| < tol beyond R."""
    nz = np.flatnonzero(np.abs(np.asarray(values)) >= tol)
    return 0.0 if nz.size == 0 else float(np.asarray(r)[nz[-1]])

"""Representation formulas for the free wave equation in 3+1 dimensions and the
three-way sign classifier for its Cauchy data.

Data ``u0``/``u1`` are functions of points x of shape (..., 3).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .radial_fields import RadialGrid, RadialProfile, radial_derivative
from .spherical_means import DEFAULT_QUADRATURE, SphereQuadrature, _means, mean_profile

# 5-point stencil for d/drho of rho*M(rho); M is even in rho so the stencil may cross 0.
_STENCIL_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_STENCIL_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_STENCIL_STEP = 2e-3
_MAX_WITNESS_TRIES = 16


def _d_rho_m(f, x0: np.ndarray, rho: np.ndarray, quad: SphereQuadrature) -> np.ndarray:
    """d/drho (rho * M_x0[f](rho)) by a fourth-order centered stencil."""
    k = _STENCIL_STEP
    radii = rho[..., None] + k * _STENCIL_OFFSETS
    g = radii * _means(f, x0[..., None, :], radii, quad)
    return g @ _STENCIL_WEIGHTS / k


def kirchhoff_eval(u0, u1, t, x0, quad: SphereQuadrature = DEFAULT_QUADRATURE):
    """Value of the free wave with data (u0, u1) at time ``t`` and point ``x0``.

    Negative ``t`` uses the same formula with radius |t|, which is the
    time reversal u1 -> -u1.  ``t`` and ``x0`` broadcast; ``x0`` has
    trailing dimension 3.
    """
    x0 = np.asarray(x0, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(x0.shape[:-1], t.shape)
    x0 = np.broadcast_to(x0, shape + (3,))
    t = np.broadcast_to(t, shape)
    rho = np.abs(t)
    out = _d_rho_m(u0, x0, rho, quad) + t * _means(u1, x0, rho, quad)
    return out if out.ndim else float(out)


def dalembert_mean(u0, u1, x0, t: float, r: float,
                   quad: SphereQuadrature = DEFAULT_QUADRATURE, n_int: int = 2001) -> float:
    """Spherical mean of the free wave at time t over the sphere |x - x0| = r."""
    if r <= 0:
        raise ValueError("dalembert_mean needs r > 0; use kirchhoff_eval at the center")
    x0 = np.asarray(x0, dtype=float)
    ends = np.array([r + t, r - t])
    m0 = _means(u0, x0, ends, quad)
    boundary = (ends[0] * m0[0] + ends[1] * m0[1]) / (2 * r)
    if t == 0:
        return float(boundary)
    rho = np.linspace(r - t, r + t, n_int)
    integrand = rho * _means(u1, x0, rho, quad)
    return float(boundary + np.trapezoid(integrand, rho) / (2 * r))


def dt_mean_boundary_identity(u0, u1, x0, t, r,
                              quad: SphereQuadrature = DEFAULT_QUADRATURE):
    """Mean of d_t u_lin(t) over |x - x0| = r via two point values of u_lin."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    t = np.asarray(t, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    lead = kirchhoff_eval(u0, u1, r + t, x0, quad)
    trail = kirchhoff_eval(u0, u1, t - r, x0, quad)
    return (np.asarray(lead) - np.asarray(trail)) / (2 * r)


class SignCondition(str, Enum):
    FORWARD_POSITIVE = "ForwardPositive"
    BACKWARD_NEGATIVE = "BackwardNegative"
    NONNEGATIVE_EVERYWHERE = "NonnegativeEverywhere"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Witness:
    x0: tuple
    q: float
    r0: float
    margin: float
    seed_value: float  # u_lin(-q, x0) for forward, u_lin(q, x0) for backward


@dataclass(frozen=True)
class SignSearch:
    x0_candidates: Sequence[Sequence[float]] = ()
    q_max: float = 4.0
    n_q: int = 64
    r_max: float = 20.0
    n_r: int = 64
    tol: float = 1e-8
    decay_tol: float = 1e-3

    @classmethod
    def default(cls, **kw) -> "SignSearch":
        pts = [(0.0, 0.0, 0.0)]
        for a in (1.0, 2.0):
            for axis in range(3):
                for sgn in (1.0, -1.0):
                    p = [0.0, 0.0, 0.0]
                    p[axis] = sgn * a
                    pts.append(tuple(p))
        return cls(x0_candidates=tuple(pts), **kw)


@dataclass
class SignConditionReport:
    condition: SignCondition
    witness: Optional[Witness]
    conditions_found: tuple = ()
    min_sampled_value: float = float("nan")
    decay_ok: bool = True
    decay_residual: float = 0.0
    search: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)  # every condition found -> its witness

    def __post_init__(self):
        needs = self.condition in (SignCondition.FORWARD_POSITIVE,
                                   SignCondition.BACKWARD_NEGATIVE)
        if needs != (self.witness is not None):
            raise ValueError("witness must be present exactly for conditions 1 and 2")
        if self.witness is not None and not self.witness.margin > 0:
            raise ValueError("witness margin must be positive")

    def to_dict(self) -> dict:
        return {
            "condition": self.condition.value,
            "witness": None if self.witness is None else _witness_dict(self.witness),
            "conditions_found": [c.value for c in self.conditions_found],
            "min_sampled_value": self.min_sampled_value,
            "decay_ok": self.decay_ok,
            "decay_residual": self.decay_residual,
            "search": self.search,
            "witnesses": {c.value: _witness_dict(w) for c, w in self.witnesses.items()},
            "note": "'for all r >= r0' is checked on the sampled radii only",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _witness_dict(w: Witness) -> dict:
    return {"x0": list(w.x0), "q": w.q, "r0": w.r0, "margin": w.margin,
            "seed_value": w.seed_value}


def _decay_residual(u0, u1, x0, r_end: float, quad) -> float:
    grid = RadialGrid.from_spacing(r_end, min(0.05, r_end / 100))
    r = grid.r
    m0 = mean_profile(u0, x0, grid, quad)
    m1 = mean_profile(u1, x0, grid, quad)
    d0 = radial_derivative(RadialProfile(grid, r * m0.values), 1).values
    tail = slice(-5, None)
    return float(max(np.max(np.abs(d0[tail])), np.max(np.abs(r[tail] * m1.values[tail]))))


def _find_r0(u0, u1, x0, q, seed, direction, search, quad):
    """Smallest sampled r >= q beyond which |u_lin(+-(2r-q))| < |seed|/2 holds."""
    r_lo = max(q, 1e-3 * search.r_max)
    r = np.linspace(r_lo, search.r_max, search.n_r)
    far = kirchhoff_eval(u0, u1, direction * (2 * r - q), x0, quad)
    ok = np.abs(far) < 0.5 * abs(seed)
    if not ok[-1]:
        return None, far
    first_bad_from_end = np.flatnonzero(~ok)
    j = 0 if first_bad_from_end.size == 0 else first_bad_from_end[-1] + 1
    # |mean of d_t u_lin| along the characteristic, via the boundary identity;
    # positive for condition 1, negative for condition 2, so the margin is the same expression
    means = (far[j:] - seed) / (2 * r[j:])
    return (float(r[j]), float(np.min(means))), far


def classify_sign_condition(u0, u1, search: Optional[SignSearch] = None,
                            quad: SphereQuadrature = DEFAULT_QUADRATURE) -> SignConditionReport:
    search = search or SignSearch.default()
    cands = np.asarray(search.x0_candidates, dtype=float).reshape(-1, 3)
    if cands.shape[0] == 0 or search.n_q < 1 or search.n_r < 2:
        raise ValueError("empty sign-condition search set")
    q = np.linspace(0.0, search.q_max, search.n_q)

    past = kirchhoff_eval(u0, u1, -q[None, :], cands[:, None, :], quad)
    future = kirchhoff_eval(u0, u1, q[None, :], cands[:, None, :], quad)
    sampled_min = float(min(past.min(), future.min()))

    decay = max(_decay_residual(u0, u1, x0, 2 * search.r_max, quad) for x0 in cands)
    decay_ok = decay < search.decay_tol

    found = {}
    for direction, values, cond in ((1.0, past, SignCondition.FORWARD_POSITIVE),
                                    (-1.0, future, SignCondition.BACKWARD_NEGATIVE)):
        order = np.argsort(values, axis=None)
        for flat in order[:_MAX_WITNESS_TRIES]:
            i, j = np.unravel_index(flat, values.shape)
            seed = float(values[i, j])
            if seed >= -search.tol:
                break
            res, far = _find_r0(u0, u1, cands[i], float(q[j]), seed, direction, search, quad)
            sampled_min = min(sampled_min, float(np.min(far)))
            if res is not None and res[1] > 0:
                found[cond] = Witness(tuple(float(c) for c in cands[i]), float(q[j]),
                                      res[0], res[1], seed)
                break

    meta = {"n_x0": int(cands.shape[0]), "q_max": search.q_max, "n_q": search.n_q,
            "r_max": search.r_max, "n_r": search.n_r, "tol": search.tol,
            "quadrature": [quad.n_theta, quad.n_phi]}
    conds = tuple(c for c in (SignCondition.FORWARD_POSITIVE, SignCondition.BACKWARD_NEGATIVE)
                  if c in found)
    if not decay_ok:
        cond, wit = SignCondition.INCONCLUSIVE, None
    elif conds:
        cond, wit = conds[0], found[conds[0]]
    elif sampled_min >= -search.tol:
        cond, wit = SignCondition.NONNEGATIVE_EVERYWHERE, None
    else:
        cond, wit = SignCondition.INCONCLUSIVE, None
    return SignConditionReport(cond, wit, conds, sampled_min, decay_ok, decay, meta,
                               {c: found[c] for c in conds})

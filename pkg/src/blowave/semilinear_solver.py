"""Radial solver for u_tt - Laplacian u = (u_t)^2.

Everything is written for w = r * (unknown), which satisfies a 1+1 wave
equation w_tt - w_rr = kappa w_t^2 + 2 a w_t + b with w(t, 0) = 0.  The
forward problem has kappa = 1/r, a = b = 0.  The backward problem for the
correction v = u - u_app has kappa = 1/r, a = d_t u_app and
b = chi(t/T) r (box u_app + (d_t u_app)^2), and is stepped with a negative
time step from v = 0 at t = 2T.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .approximate_solution import ApproximateSolution, CutoffSpec, chi_cutoff
from .asymptotic_system import DEFAULT_STEP, AsymptoticData
from .radial_fields import (RadialGrid, RadialProfile, Represents, SpacetimeField,
                            center_value, radial_derivative, weighted_l2)

log = logging.getLogger(__name__)

SUPPORT_TOL = 1e-12


class SolveStatus(str, Enum):
    COMPLETED = "Completed"
    BLEW_UP = "BlewUp"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class BlowUp:
    t_blow: float
    r_blow: float
    bracket: tuple
    # "threshold": max|u_t| crossed the threshold while the implicit source still had roots.
    # "threshold_after_no_root": some node lost its real root first; such nodes take the
    # explicit source on those steps until the threshold is crossed.
    trigger: str
    t_no_root: Optional[float] = None


@dataclass
class SolveOutcome:
    field: SpacetimeField
    status: SolveStatus
    energy_trace: np.ndarray  # (k, 2): t, E
    max_dtu_trace: np.ndarray  # (k, 2): t, max|u_t| over the diagnostic region
    blowup: Optional[BlowUp] = None
    diverged_at: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def t_blow(self) -> Optional[float]:
        return None if self.blowup is None else self.blowup.t_blow

    def summary(self) -> dict:
        out = {"status": self.status.value, "t_start": self.field.t_start,
               "t_end": self.field.t_end, "n_slices": self.field.n_times,
               "h": self.field.grid.h, "r_max": self.field.grid.r_max}
        if self.blowup is not None:
            b = self.blowup
            out["blowup"] = {"t_blow": b.t_blow, "r_blow": b.r_blow, "bracket": list(b.bracket),
                             "trigger": b.trigger, "t_no_root": b.t_no_root}
        if self.diverged_at is not None:
            out["diverged_at"] = self.diverged_at
        if len(self.energy_trace):
            out["energy_first"] = float(self.energy_trace[0, 1])
            out["energy_last"] = float(self.energy_trace[-1, 1])
        out.update(self.meta)
        return out

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)

    def energy_csv(self) -> str:
        lines = ["t,energy"]
        lines += [f"{t!r},{e!r}" for t, e in self.energy_trace.tolist()]
        return "\n".join(lines) + "\n"

    def max_dtu_csv(self) -> str:
        lines = ["t,max_abs_dtu"]
        lines += [f"{t!r},{m!r}" for t, m in self.max_dtu_trace.tolist()]
        return "\n".join(lines) + "\n"


def _u_of(w: np.ndarray, r: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(w)
    out[1:] = w[1:] / r[1:]
    out[0] = center_value(w, h)
    return out


def slice_energy(u: np.ndarray, ut: np.ndarray, grid: RadialGrid, n: Optional[int] = None) -> float:
    """4 pi int (u_t^2 + u_r^2) r^2 dr over the first ``n`` nodes (all by default)."""
    if n is not None and n < grid.n_points:
        sub = RadialGrid(grid.r[n - 1], n)
        u, ut, grid = u[:n], ut[:n], sub
    ur = radial_derivative(RadialProfile(grid, u), 1)
    return weighted_l2(RadialProfile(grid, ut)) + weighted_l2(ur)


def energy(fld: SpacetimeField, t: float) -> float:
    i = fld.time_index(t)
    return slice_energy(fld.u_values()[i], fld.ut_values()[i], fld.grid)


def _measured_support(p: RadialProfile) -> float:
    nz = np.flatnonzero(np.abs(p.values) > SUPPORT_TOL)
    return 0.0 if nz.size == 0 else float(p.r[nz[-1]])


Forcing = Callable[[float], tuple]


def _evolve(grid: RadialGrid, w0: np.ndarray, wt0: np.ndarray, t0: float, n_steps: int,
            tau: float, forcing: Optional[Forcing], threshold: float, store_every: int,
            lagged: bool, diag_nodes: Callable[[float], int], backend: Optional[str],
            nonlinearity: float = 1.0):
    """Shared time loop.  Slices are stored at t0 + k*store_every*tau."""
    r, h = grid.r, grid.h
    lam2 = (tau / h) ** 2
    kappa = np.zeros_like(r)
    kappa[1:] = nonlinearity / r[1:]
    zeros = np.zeros_like(r)

    def coeffs(t):
        if forcing is None:
            return zeros, zeros
        return forcing(t)

    stored_w, stored_z, e_trace, m_trace = [], [], [], []

    def record(n, t, w, z):
        nd = diag_nodes(t)
        ut = _u_of(z, r, h)
        m_trace.append((t, float(np.max(np.abs(ut[:nd])))))
        if n % store_every == 0:
            stored_w.append(w.copy())
            stored_z.append(z.copy())
            e_trace.append((t, slice_energy(_u_of(w, r, h), ut, grid, nd)))
        return ut, nd

    # Taylor start: w1 = w0 + tau w_t + tau^2/2 w_tt
    a0, b0 = coeffs(t0)
    wrr = np.zeros_like(w0)
    wrr[1:-1] = (w0[2:] - 2 * w0[1:-1] + w0[:-2]) / (h * h)
    w1 = w0 + tau * wt0 + 0.5 * tau * tau * (wrr + kappa * wt0**2 + 2 * a0 * wt0 + b0)
    w1[0] = 0.0
    w1[-1] = w0[-1] - math.sqrt(lam2) * (w0[-1] - w0[-2])
    record(0, t0, w0, wt0.copy())

    w_old, w_cur = w0.copy(), w1
    w_new, z = np.empty_like(w0), np.empty_like(w0)
    status, blow, div_t = SolveStatus.COMPLETED, None, None
    no_root_t = None
    prev_t = t0
    # iteration n produces w at level n+1 and the centered rate at level n, so the loop
    # runs one level past the end to give the last stored slice a centered rate as well
    for n in range(1, n_steps + 1):
        t = t0 + n * tau
        a, b = coeffs(t)
        _, _, bad = _kernels.leapfrog_step(w_old, w_cur, lam2, tau, kappa, a, b, lagged,
                                           w_new, z, backend)
        if bad >= 0 and no_root_t is None:
            no_root_t = t
            log.info("implicit source lost its root at t=%g r=%g; explicit there", t, r[bad])
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w_new))):
            status, div_t = SolveStatus.DIVERGED, t
            break
        ut, nd = record(n, t, w_cur, z)
        peak = np.abs(ut[:nd])
        if peak.max() > threshold:
            j = int(np.argmax(peak))
            trig = "threshold" if no_root_t is None else "threshold_after_no_root"
            blow = BlowUp(t, float(r[j]), (prev_t, t), trig, no_root_t)
            status = SolveStatus.BLEW_UP
            break
        w_old, w_cur, w_new = w_cur, w_new, w_old
        prev_t = t
    return (np.array(stored_w), np.array(stored_z), np.array(e_trace).reshape(-1, 2),
            np.array(m_trace).reshape(-1, 2), status, blow, div_t)


def _grid_of(u0: RadialProfile, u1: RadialProfile) -> RadialGrid:
    if u0.grid != u1.grid:
        raise ValueError("u0 and u1 must live on the same grid")
    return u0.grid


def solve_forward(u0: RadialProfile, u1: RadialProfile, t_max: float, cfl: float = 0.5,
                  blowup_threshold: float = 1e6, *, store_every: Optional[int] = None,
                  lagged: bool = False, domain_of_dependence: bool = False,
                  t_start: float = 0.0, nonlinearity: float = 1.0,
                  backend: Optional[str] = None) -> SolveOutcome:
    """Evolve Cauchy data (u0, u1) at ``t_start`` up to ``t_start + t_max``.

    By default the data must leave the outer boundary untouched
    (r_max >= support + t_max).  With ``domain_of_dependence=True`` that
    check is waived and all diagnostics (blow-up test, traces) are
    restricted to r <= r_max - (t - t_start), the part of the grid the
    outer boundary cannot reach.  ``nonlinearity`` scales the (u_t)^2 term
    (0 gives the free wave equation).
    """
    grid = _grid_of(u0, u1)
    if not 0 < cfl <= 1:
        raise ValueError(f"CFL number dt/h must lie in (0, 1], got {cfl}")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if not blowup_threshold > 0:
        raise ValueError("blow-up threshold must be positive")
    r, h = grid.r, grid.h
    if domain_of_dependence:
        if t_max >= grid.r_max:
            raise ValueError("t_max must be below r_max when diagnostics follow the domain of dependence")

        def diag_nodes(t):
            return max(1, int(np.searchsorted(r, grid.r_max - abs(t - t_start), side="right")))
    else:
        support = max(_measured_support(u0), _measured_support(u1))
        if support + t_max > grid.r_max + 1e-12:
            raise ValueError(f"r_max={grid.r_max} < data support {support} + t_max {t_max}; "
                             "enlarge the grid or enable domain_of_dependence")

        def diag_nodes(t):
            return grid.n_points

    n_steps = int(math.ceil(t_max / (cfl * h) - 1e-9))
    dt = t_max / n_steps
    if store_every is None:
        store_every = max(1, n_steps // 1000)
    w0 = r * u0.values
    wt0 = r * u1.values
    W, Z, et, mt, status, blow, div_t = _evolve(grid, w0, wt0, t_start, n_steps, dt, None,
                                                blowup_threshold, store_every, lagged,
                                                diag_nodes, backend, nonlinearity)
    fld = SpacetimeField(t_start, dt * store_every, grid, W, Represents.V, rates=Z, solver_dt=dt)
    meta = {"cfl": dt / h, "dt": dt, "store_every": store_every, "lagged_source": lagged,
            "nonlinearity": nonlinearity}
    return SolveOutcome(fld, status, et, mt, blow, div_t, meta)


def scheme_residual(w_exact: Callable, t: float, grid: RadialGrid, dt: float,
                    lagged: bool = False) -> float:
    """Max over interior nodes of the scheme's truncation error on an exact solution.

    ``w_exact(t, r)`` is r times an exact solution of u_tt - Laplacian u = u_t^2.
    The result is the u-level residual (divided by r).
    """
    r = grid.r[1:-1]
    h = grid.h
    wm, w0, wp = w_exact(t - dt, grid.r), w_exact(t, grid.r), w_exact(t + dt, grid.r)
    wtt = (wp[1:-1] - 2 * w0[1:-1] + wm[1:-1]) / dt**2
    wrr = (w0[2:] - 2 * w0[1:-1] + w0[:-2]) / h**2
    z = (w0[1:-1] - wm[1:-1]) / dt if lagged else (wp[1:-1] - wm[1:-1]) / (2 * dt)
    res = (wtt - wrr - z * z / r) / r
    return float(np.max(np.abs(res)))


@dataclass(frozen=True)
class BackwardProblemSpec:
    """Backward Cauchy problem for v = u - u_app with v = 0 at t = 2T.

    The forcing carries chi(t/T), chi = 1 on [-1, 1] and 0 outside (-2, 2).
    The default grid reaches r_max = 3T + R + margin because u_app is
    supported up to r = 3t/2.
    """

    data: AsymptoticData
    epsilon: float = 0.1
    delta: float = 0.1
    T: float = 50.0
    h: float = 0.1
    cfl: float = 1.0
    margin: float = 5.0
    r_max: Optional[float] = None
    store_dt: float = 1.0
    step: float = DEFAULT_STEP
    blowup_threshold: float = 1e6
    lagged: bool = False

    def __post_init__(self):
        if not self.T > 1:
            raise ValueError("match time T must exceed 1")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"CFL number dt/h must lie in (0, 1], got {self.cfl}")
        if not self.h > 0 or not self.store_dt > 0:
            raise ValueError("h and store_dt must be positive")
        CutoffSpec(self.epsilon, self.delta)  # validates epsilon, delta

    def chi(self, t):
        return chi_cutoff(np.asarray(t, float) / self.T)

    @property
    def cutoffs(self) -> CutoffSpec:
        return CutoffSpec(self.epsilon, self.delta)

    def approximate_solution(self) -> ApproximateSolution:
        return ApproximateSolution(self.data, self.cutoffs, self.step)

    def grid(self) -> RadialGrid:
        R = self.data.support_radius if self.data.compact else 0.0
        r_max = self.r_max if self.r_max is not None else 3 * self.T + R + self.margin
        return RadialGrid.from_spacing(r_max, self.h)

    def steps(self) -> tuple:
        """(n_steps, dt, store_every) with t = 0 landing on a stored slice."""
        h = self.grid().h
        store_every = max(1, int(round(self.store_dt / (self.cfl * h))))
        n = int(math.ceil(2 * self.T / (self.cfl * h * store_every) - 1e-9)) * store_every
        return n, 2 * self.T / n, store_every


def solve_backward(spec: BackwardProblemSpec, backend: Optional[str] = None) -> SolveOutcome:
    """v on [0, 2T]; the stored field runs forward in time from t = 0."""
    data = spec.data
    if data.sign_certificate.value != "Nonnegative":
        raise ValueError("the backward construction needs asymptotic data A >= 0")
    grid = spec.grid()
    r = grid.r
    n, dt, store_every = spec.steps()
    approx = spec.approximate_solution()
    zeros = np.zeros_like(r)

    def forcing(t):
        if t <= spec.cutoffs.t0:
            return zeros, zeros
        F, ut = approx.residual_and_rate(t, r)
        return ut, spec.chi(t) * r * F

    w0 = np.zeros_like(r)
    W, Z, et, mt, status, blow, div_t = _evolve(grid, w0, w0.copy(), 2 * spec.T, n, -dt, forcing,
                                                spec.blowup_threshold, store_every, spec.lagged,
                                                lambda t: grid.n_points, backend)
    W, Z = W[::-1], Z[::-1]
    t_first = 2 * spec.T - (W.shape[0] - 1) * dt * store_every
    if abs(t_first) < 1e-9:
        t_first = 0.0
    fld = SpacetimeField(t_first, dt * store_every, grid, W, Represents.V, rates=Z, solver_dt=dt)
    meta = {"T": spec.T, "epsilon": spec.epsilon, "delta": spec.delta, "dt": dt,
            "store_every": store_every, "cfl": dt / grid.h}
    return SolveOutcome(fld, status, et[::-1].copy(), mt[::-1].copy(), blow, div_t, meta)


def constructed_solution(outcome: SolveOutcome, spec: BackwardProblemSpec, t: float):
    """(u, u_t) profiles of u = v + u_app at a stored time."""
    fld = outcome.field
    i = fld.time_index(t)
    approx = spec.approximate_solution()
    r = fld.grid.r
    v, vt = fld.u_values()[i], fld.ut_values()[i]
    if t > spec.cutoffs.t0:
        _, ua_t = approx.residual_and_rate(t, r)
        ua = np.asarray(approx.value(t, r))
    else:
        ua = ua_t = np.zeros_like(r)
    return RadialProfile(fld.grid, v + ua), RadialProfile(fld.grid, vt + ua_t)


@dataclass(frozen=True)
class TailBound:
    """Best constant c in |u(r)| >= c / (r (1 + ln r)) over [r_lo, r_hi].

    ``c`` is 0 when u changes sign in the window (``sign_change_at`` gives the
    first root of the piecewise-linear interpolant).
    """

    c: float
    r_lo: float
    r_hi: float
    sign_change_at: Optional[float] = None

    def to_dict(self) -> dict:
        return {"c": self.c, "window": [self.r_lo, self.r_hi],
                "sign_change_at": self.sign_change_at}


def tail_lower_bound(u: RadialProfile, r_lo: float, r_hi: float) -> TailBound:
    if not 1.0 <= r_lo < r_hi:
        raise ValueError("need 1 <= r_lo < r_hi")
    r, v = u.r, u.values
    m = (r >= r_lo) & (r <= r_hi)
    if m.sum() < 2:
        raise ValueError("window holds fewer than two grid nodes")
    rs, vs = r[m], v[m]
    flip = np.flatnonzero(np.sign(vs[1:]) != np.sign(vs[:-1]))
    if flip.size or np.any(vs == 0):
        if flip.size:
            i = flip[0]
            root = rs[i] - vs[i] * (rs[i + 1] - rs[i]) / (vs[i + 1] - vs[i])
        else:
            root = rs[np.argmax(vs == 0)]
        return TailBound(0.0, r_lo, r_hi, float(root))
    c = float(np.min(np.abs(vs) * rs * (1 + np.log(rs))))
    return TailBound(c, r_lo, r_hi)


def _as_outcome(x) -> SolveOutcome:
    return solve_backward(x) if isinstance(x, BackwardProblemSpec) else x


def cauchy_gap(first, second) -> float:
    """sup over stored t in [0, T1] of the L^2 norm of the space-time gradient of v^T1 - v^T2.

    Arguments are :class:`BackwardProblemSpec` (solved here) or finished
    backward outcomes.  Both must share h and the stored time step; the
    comparison uses the radii common to both grids.
    """
    a, b = _as_outcome(first), _as_outcome(second)
    for o in (a, b):
        if o.status is not SolveStatus.COMPLETED:
            raise ValueError("cauchy_gap needs two completed backward solves")
    fa, fb = a.field, b.field
    if (not math.isclose(fa.grid.h, fb.grid.h, rel_tol=1e-12)
            or not math.isclose(fa.dt, fb.dt, rel_tol=1e-12)
            or not math.isclose(fa.solver_dt or fa.dt, fb.solver_dt or fb.dt, rel_tol=1e-12)
            or abs(fa.t_start - fb.t_start) > 1e-9):
        raise ValueError("grid mismatch between the two solves; resample first")
    T1 = min(a.meta.get("T", fa.t_end / 2), b.meta.get("T", fb.t_end / 2))
    n_r = min(fa.grid.n_points, fb.grid.n_points)
    grid = RadialGrid(fa.grid.r[n_r - 1], n_r)
    ua, uta = fa.u_values()[:, :n_r], fa.ut_values()[:, :n_r]
    ub, utb = fb.u_values()[:, :n_r], fb.ut_values()[:, :n_r]
    k = int(math.floor((T1 - fa.t_start) / fa.dt + 1e-9)) + 1
    gap = 0.0
    for i in range(min(k, fa.n_times, fb.n_times)):
        e = slice_energy(ua[i] - ub[i], uta[i] - utb[i], grid)
        gap = max(gap, math.sqrt(e))
    return gap

"""Approximate solution u_app = eps r^-1 eta(t) psi(r/t) U(eps ln t - delta, r - t, omega).

Derivatives (the wave operator, d_t, the scaling field) are taken by
finite differences with one Richardson step.  The radial wave operator is
applied in factored form (d_t - d_r)(d_t + d_r) acting on r*u_app, with
each factor a centered difference along a characteristic direction.
Along the outgoing direction r - t is frozen, so the O(1) profile
derivatives in q never enter the subtraction and the late-time residual
(size eps t^-3) stays resolvable in double precision.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .asymptotic_system import DEFAULT_STEP, AsymptoticData, fit_power_law, integrate_U

log = logging.getLogger(__name__)


def smoothstep(x):
    """C^2 switch 6x^5 - 15x^4 + 10x^3, clamped to [0, 1]."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


def psi_cutoff(sigma):
    """1 on [3/4, 5/4], 0 outside (1/2, 3/2)."""
    sigma = np.asarray(sigma, dtype=float)
    return smoothstep((sigma - 0.5) / 0.25) * smoothstep((1.5 - sigma) / 0.25)


def chi_cutoff(x):
    """1 on [-1, 1], 0 outside (-2, 2)."""
    return smoothstep(2.0 - np.abs(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class CutoffSpec:
    epsilon: float = 0.1
    delta: float = 0.1
    t0: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in (0, 0.5]")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.t0 is None:
            object.__setattr__(self, "t0", math.exp(self.delta / self.epsilon))
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")

    def eta(self, t):
        return smoothstep((np.asarray(t, dtype=float) - self.t0) / self.t0)

    def psi(self, sigma):
        return psi_cutoff(sigma)

    def slow_time(self, t):
        return self.epsilon * np.log(t) - self.delta


@dataclass
class ApproximateSolution:
    data: AsymptoticData
    spec: CutoffSpec = field(default_factory=CutoffSpec)
    step: float = DEFAULT_STEP
    _warned: bool = field(default=False, repr=False)

    # -- point values -------------------------------------------------
    def rv(self, t: float, r, omega=None) -> np.ndarray:
        """r * u_app at a single time ``t`` for an array of radii."""
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        if t <= 0:
            return out
        eta = float(self.spec.eta(t))
        if eta == 0.0:
            return out
        psi = self.spec.psi(r / t)
        q = r - t
        lower = -self.data.support_radius if self.data.compact else -math.inf
        live = (psi > 0) & (q > lower)
        if not np.any(live):
            return out
        s = float(self.spec.slow_time(t))
        if s < 0:
            if not self._warned:
                log.warning("slow time s=%g < 0 at t=%g: U frozen at s=0 (outside the model)", s, t)
                self._warned = True
            s = 0.0
        U = integrate_U(self.data, s, q[live], omega, self.step)
        out[live] = self.spec.epsilon * eta * psi[live] * U
        return out

    def value(self, t, r, omega=None):
        t_arr, r_arr = np.broadcast_arrays(np.asarray(t, float), np.asarray(r, float))
        out = np.zeros(t_arr.shape)
        for tv in np.unique(t_arr):
            m = t_arr == tv
            rr = r_arr[m]
            v = self.rv(float(tv), rr, omega)
            with np.errstate(divide="ignore", invalid="ignore"):
                out[m] = np.where(rr > 0, v / np.where(rr > 0, rr, 1.0), 0.0)
        return out if out.ndim else float(out)

    # -- derivatives --------------------------------------------------
    def _steps(self, t: float):
        h = min(0.25, 0.02 * t)
        k = min(1e-3, 0.002 * t)
        return h, k

    def _box_terms(self, t: float, r: np.ndarray, omega, h: float, k: float):
        """(v_tt - v_rr, u_t) at one time by characteristic differences, v = r u_app."""
        def g(tt, rr):  # (d_t + d_r) v, r - t frozen
            return (self.rv(tt + h, rr + h, omega) - self.rv(tt - h, rr - h, omega)) / (2 * h)
        box = (g(t + k, r - k) - g(t - k, r + k)) / (2 * k)
        vt = (self.rv(t + k, r, omega) - self.rv(t - k, r, omega)) / (2 * k)
        return box, vt

    def _angular_laplacian(self, t: float, r: np.ndarray, omega, k: float = 1e-3):
        w = np.asarray(omega, dtype=float)
        w = w / np.linalg.norm(w)
        theta = math.acos(np.clip(w[2], -1, 1))
        phi = math.atan2(w[1], w[0])
        st = math.sin(theta)
        if st < 10 * k:
            raise ValueError("angular stencil too close to the pole; rotate the probe direction")

        def rv_at(th, ph):
            om = (math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th))
            return self.rv(t, r, om)

        c = rv_at(theta, phi)
        tp, tm = rv_at(theta + k, phi), rv_at(theta - k, phi)
        pp, pm = rv_at(theta, phi + k), rv_at(theta, phi - k)
        d_th = (math.sin(theta + k / 2) * (tp - c) - math.sin(theta - k / 2) * (c - tm)) / (st * k * k)
        d_ph = (pp - 2 * c + pm) / (st * st * k * k)
        return d_th + d_ph  # of r*u; divide by r^3 for the u-level term

    def residual_and_rate(self, t: float, r, omega=None):
        """(box u_app + (d_t u_app)^2, d_t u_app) at one time on an array of radii."""
        r = np.asarray(r, dtype=float)
        h, k = self._steps(t)
        b1, vt1 = self._box_terms(t, r, omega, h, k)
        b2, vt2 = self._box_terms(t, r, omega, 2 * h, 2 * k)
        box = (4 * b1 - b2) / 3
        vt = (4 * vt1 - vt2) / 3
        F = np.zeros(r.shape)
        ut = np.zeros(r.shape)
        pos = r > 0
        ut[pos] = vt[pos] / r[pos]
        F[pos] = -box[pos] / r[pos] + ut[pos] ** 2
        if omega is not None:
            F[pos] += self._angular_laplacian(t, r[pos], omega) / r[pos] ** 3
        return F, ut

    def step_warning(self, t: float) -> bool:
        """True when the difference steps are not small against the cutoff scales.

        The psi transition has width t/4 in r; the eta transition [t0, 2 t0]
        only matters when the stencil reaches into it.
        """
        h, k = self._steps(t)
        reach = 2 * (h + k)
        scale = 0.25 * t
        if t - reach < 2 * self.spec.t0 and t + reach > self.spec.t0:
            scale = min(scale, self.spec.t0)
        return 2 * h > 0.1 * scale


def eval_uapp(approx: ApproximateSolution, t, r, omega=None):
    return approx.value(t, r, omega)


@dataclass
class ResidualEvaluation:
    values: np.ndarray
    step_warning: bool


def uapp_residual(approx: ApproximateSolution, t, r, omega=None) -> ResidualEvaluation:
    """box u_app + (d_t u_app)^2 at points (t, r); t and r broadcast."""
    t_arr, r_arr = np.broadcast_arrays(np.asarray(t, float), np.asarray(r, float))
    out = np.zeros(t_arr.shape)
    warn = False
    for tv in np.unique(t_arr):
        if tv <= 0:
            raise ValueError("residual needs t > 0")
        m = t_arr == tv
        out[m] = approx.residual_and_rate(float(tv), r_arr[m], omega)[0]
        warn |= approx.step_warning(float(tv))
    return ResidualEvaluation(out if out.ndim else np.asarray(float(out)), warn)


# -- decay reports -------------------------------------------------------
@dataclass
class DecayReport:
    exponents: dict
    t: np.ndarray
    sup_values: dict
    fit_residuals: dict

    def to_dict(self) -> dict:
        return {
            "exponents": self.exponents,
            "fit_range": [float(self.t[0]), float(self.t[-1])],
            "max_abs_fit_residual": {k: float(np.max(np.abs(v)))
                                     for k, v in self.fit_residuals.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _sup_over_window(fn, t_values, q_values):
    return np.array([np.max(np.abs(fn(float(t), t + q_values))) for t in t_values])


def amplitude_decay(approx: ApproximateSolution, t_values, q_values, omega=None) -> DecayReport:
    """Fitted exponent of sup |u_app| over r - t in ``q_values`` against 1 + t."""
    t_values = np.asarray(t_values, float)
    q_values = np.asarray(q_values, float)
    sup = _sup_over_window(lambda t, r: approx.value(t, r, omega), t_values, q_values)
    slope, _, res = fit_power_law(1 + t_values, sup)
    return DecayReport({"u_app": slope}, t_values, {"u_app": sup}, {"u_app": res})


def first_order_vectorfield_check(approx: ApproximateSolution, t_values, q_values,
                                  k: float = 1e-3) -> DecayReport:
    """Decay exponents of sup |Z u_app| for Z in {d_t, d_r, S = t d_t + r d_r} (radial mode)."""
    t_values = np.asarray(t_values, float)
    q_values = np.asarray(q_values, float)

    def dt(t, r):
        return (approx.value(t + k, r) - approx.value(t - k, r)) / (2 * k)

    def dr(t, r):
        return (approx.value(t, r + k) - approx.value(t, r - k)) / (2 * k)

    def scaling(t, r):
        return t * dt(t, r) + r * dr(t, r)

    fields = {"d_t": dt, "d_r": dr, "S": scaling}
    sups, exps, res = {}, {}, {}
    for name, fn in fields.items():
        sups[name] = _sup_over_window(fn, t_values, q_values)
        if np.all(sups[name] == 0):
            exps[name], res[name] = 0.0, np.zeros_like(t_values)
        else:
            exps[name], _, res[name] = fit_power_law(1 + t_values, sups[name])
    return DecayReport(exps, t_values, sups, res)

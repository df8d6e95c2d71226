"""Leapfrog update for w_tt - w_rr = kappa*w_t^2 + 2*a*w_t + b on a uniform radial grid.

Two interchangeable implementations: a numba ``@njit`` loop and a
vectorised numpy path.  Set ``BLOWAVE_DISABLE_NUMBA=1`` to force numpy.

Centered source (default): the source is evaluated with the centered
rate z = (w_new - w_old)/(2 tau), which makes each node a scalar
quadratic (tau*kappa/2) z^2 - (1 - a tau) z + c = 0 solved in closed
form.  A negative discriminant means the node has no real root (the
discrete solution is blowing up there); such nodes fall back to the
lagged source for that step, which keeps the update local.  ``tau`` is signed, so the same update runs
backwards in time.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

USE_NUMBA = njit is not None and os.environ.get("BLOWAVE_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def _step_numpy(w_old, w_cur, lam2, tau, kappa, a, b, lagged, w_new, z):
    n = w_cur.size
    P = np.empty(n)
    P[1:-1] = 2.0 * w_cur[1:-1] + lam2 * (w_cur[2:] - 2.0 * w_cur[1:-1] + w_cur[:-2])
    inner = slice(1, n - 1)
    k, aa, bb = kappa[inner], a[inner], b[inner]
    bad = -1
    if lagged:
        zl = (w_cur[inner] - w_old[inner]) / tau
        w_new[inner] = P[inner] - w_old[inner] + tau * tau * (k * zl * zl + 2.0 * aa * zl + bb)
        z[inner] = (w_new[inner] - w_old[inner]) / (2.0 * tau)
    else:
        c = (P[inner] - 2.0 * w_old[inner] + tau * tau * bb) / (2.0 * tau)
        beta = 1.0 - aa * tau
        disc = beta * beta - 2.0 * tau * k * c
        neg = disc < 0.0
        zi = 2.0 * c / (beta + np.sqrt(np.maximum(disc, 0.0)))
        z[inner] = zi
        w_new[inner] = w_old[inner] + 2.0 * tau * zi
        if neg.any():
            bad = int(np.argmax(neg)) + 1
            # nodes without a real root take the explicit lagged source
            idx = np.flatnonzero(neg) + 1
            zl = (w_cur[idx] - w_old[idx]) / tau
            w_new[idx] = P[idx] - w_old[idx] + tau * tau * (
                kappa[idx] * zl * zl + 2.0 * a[idx] * zl + b[idx])
            z[idx] = (w_new[idx] - w_old[idx]) / (2.0 * tau)
    w_new[0] = 0.0
    z[0] = 0.0
    nu = np.sqrt(lam2)
    w_new[-1] = w_cur[-1] - nu * (w_cur[-1] - w_cur[-2])
    z[-1] = (w_new[-1] - w_old[-1]) / (2.0 * tau)
    return bad


def _step_loop(w_old, w_cur, lam2, tau, kappa, a, b, lagged, w_new, z):
    n = w_cur.size
    bad = -1
    tau2 = tau * tau
    for i in range(1, n - 1):
        P = 2.0 * w_cur[i] + lam2 * (w_cur[i + 1] - 2.0 * w_cur[i] + w_cur[i - 1])
        if lagged:
            zl = (w_cur[i] - w_old[i]) / tau
            w_new[i] = P - w_old[i] + tau2 * (kappa[i] * zl * zl + 2.0 * a[i] * zl + b[i])
            z[i] = (w_new[i] - w_old[i]) / (2.0 * tau)
        else:
            c = (P - 2.0 * w_old[i] + tau2 * b[i]) / (2.0 * tau)
            beta = 1.0 - a[i] * tau
            disc = beta * beta - 2.0 * tau * kappa[i] * c
            if disc < 0.0:
                if bad < 0:
                    bad = i
                zl = (w_cur[i] - w_old[i]) / tau
                w_new[i] = P - w_old[i] + tau2 * (kappa[i] * zl * zl + 2.0 * a[i] * zl + b[i])
                z[i] = (w_new[i] - w_old[i]) / (2.0 * tau)
            else:
                zi = 2.0 * c / (beta + np.sqrt(disc))
                z[i] = zi
                w_new[i] = w_old[i] + 2.0 * tau * zi
    w_new[0] = 0.0
    z[0] = 0.0
    nu = np.sqrt(lam2)
    w_new[n - 1] = w_cur[n - 1] - nu * (w_cur[n - 1] - w_cur[n - 2])
    z[n - 1] = (w_new[n - 1] - w_old[n - 1]) / (2.0 * tau)
    return bad


if njit is not None:
    _step_jit = njit(cache=True)(_step_loop)
else:  # pragma: no cover
    _step_jit = None


def leapfrog_step(w_old, w_cur, lam2, tau, kappa, a, b, lagged=False, w_new=None, z=None,
                  backend=None):
    """Advance one step; returns (w_new, z, first_bad_node or -1)."""
    if w_new is None:
        w_new = np.empty_like(w_cur)
    if z is None:
        z = np.empty_like(w_cur)
    backend = backend or ("numba" if USE_NUMBA else "numpy")
    fn = _step_jit if backend == "numba" else _step_numpy
    bad = fn(w_old, w_cur, float(lam2), float(tau), kappa, a, b, bool(lagged), w_new, z)
    return w_new, z, int(bad)

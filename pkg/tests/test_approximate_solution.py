import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blowave.approximate_solution import (ApproximateSolution, CutoffSpec, amplitude_decay,
                                          chi_cutoff, eval_uapp, first_order_vectorfield_check,
                                          psi_cutoff, smoothstep, uapp_residual)
from blowave.asymptotic_system import AsymptoticData, integrate_U
from blowave.data import make

DATA = AsymptoticData.from_datum(make("bump", a=1.0, w=1.0))
ZERO = AsymptoticData.from_datum(make("zero"))
SPEC = CutoffSpec(epsilon=0.1, delta=0.1)
APPROX = ApproximateSolution(DATA, SPEC)


@given(st.floats(-2, 3))
def test_cutoffs_in_unit_interval(x):
    for f in (smoothstep, psi_cutoff, chi_cutoff):
        v = float(f(x))
        assert 0.0 <= v <= 1.0


def test_cutoff_plateaus_and_supports():
    assert np.all(psi_cutoff(np.linspace(0.75, 1.25, 11)) == 1.0)
    assert np.all(psi_cutoff(np.array([0.0, 0.5, 1.5, 2.0])) == 0.0)
    assert np.all(chi_cutoff(np.linspace(-1, 1, 11)) == 1.0)
    assert np.all(chi_cutoff(np.array([-3, -2, 2, 3.0])) == 0.0)
    assert SPEC.t0 == pytest.approx(math.e)
    assert SPEC.eta(SPEC.t0) == 0.0 and SPEC.eta(2 * SPEC.t0) == 1.0


def test_smoothstep_is_c2():
    # first and second derivatives vanish at both ends
    k = 1e-4
    for x in (0.0, 1.0):
        d1 = (smoothstep(x + k) - smoothstep(x - k)) / (2 * k)
        d2 = (smoothstep(x + k) - 2 * smoothstep(x) + smoothstep(x - k)) / k**2
        assert abs(d1) < 1e-6 and abs(d2) < 1e-2


def test_spec_validation():
    for kw in ({"epsilon": 0.0}, {"epsilon": 0.6}, {"delta": 0.0}, {"delta": 1.0}):
        with pytest.raises(ValueError):
            CutoffSpec(**kw)


def test_zero_data_gives_zero():
    a = ApproximateSolution(ZERO, SPEC)
    t = np.array([5.0, 50.0, 500.0])
    assert np.all(eval_uapp(a, t[:, None], t[:, None] + np.linspace(-2, 2, 9)) == 0)
    assert np.all(uapp_residual(a, 50.0, np.linspace(40, 60, 9)).values == 0)
    rep = first_order_vectorfield_check(a, [100, 200, 400], np.linspace(-2, 2, 5))
    assert rep.exponents == {"d_t": 0.0, "d_r": 0.0, "S": 0.0}


def test_support_exactly_zero_outside():
    rng = np.random.default_rng(3)
    t = np.concatenate([rng.uniform(0.1, SPEC.t0, 250), rng.uniform(10, 1000, 750)])
    # outside in r/t, or behind the characteristic r - t = -R
    which = rng.integers(0, 3, t.size)
    r = np.where(which == 0, rng.uniform(0, 0.5, t.size) * t,
                 np.where(which == 1, rng.uniform(1.5, 3, t.size) * t,
                          t - 1.0 - rng.uniform(0, 5, t.size)))
    r = np.where(t < SPEC.t0, rng.uniform(0, 3, t.size) * t, r)
    vals = eval_uapp(APPROX, t, np.maximum(r, 0))
    assert vals.shape == (1000,)
    assert np.all(vals == 0.0)


def test_plateau_identity():
    for t in (50.0, 500.0):
        q = np.linspace(-0.9, 3.0, 14)
        r = t + q
        s = SPEC.epsilon * math.log(t) - SPEC.delta
        expect = SPEC.epsilon * integrate_U(DATA, s, q) / r
        np.testing.assert_allclose(eval_uapp(APPROX, t, r), expect, rtol=1e-12, atol=1e-17)


def test_epsilon_linearity_with_fixed_profile():
    a = ApproximateSolution(DATA, CutoffSpec(epsilon=0.1, delta=0.1))
    # same t0 and slow time eps ln t - delta, doubled amplitude
    b = ApproximateSolution(DATA, CutoffSpec(epsilon=0.2, delta=0.2, t0=a.spec.t0))
    t = 80.0
    r = t + np.linspace(-0.9, 2, 7)
    s_a = a.spec.slow_time(t)
    s_b = b.spec.slow_time(t)
    assert s_b == pytest.approx(2 * s_a + 0.0)
    # holding U fixed: compare against the literal product with U at the same s
    U = integrate_U(DATA, s_a, r - t)
    np.testing.assert_allclose(eval_uapp(a, t, r), 0.1 * U / r, rtol=1e-14)
    np.testing.assert_allclose(0.2 * U / r, 2 * eval_uapp(a, t, r), rtol=1e-14)


def test_residual_slope():
    t = 100.0 * 2.0 ** np.arange(7)
    for q in (-0.5, 0.0, 0.5):
        res = np.array([abs(float(uapp_residual(APPROX, tv, tv + q).values)) for tv in t])
        slope = np.polyfit(np.log(t), np.log(res), 1)[0]
        assert -3.3 <= slope <= -2.6


def test_residual_step_warning_only_at_small_t():
    assert not uapp_residual(APPROX, 100.0, 100.0).step_warning
    assert uapp_residual(APPROX, 1.5 * SPEC.t0, 1.5 * SPEC.t0).step_warning
    with pytest.raises(ValueError):
        uapp_residual(APPROX, 0.0, 1.0)


def test_amplitude_decay():
    rep = amplitude_decay(APPROX, np.geomspace(100, 10_000, 9), np.linspace(-0.9, 3, 40))
    eps = SPEC.epsilon
    assert -1.0 - 2 * eps <= rep.exponents["u_app"] <= -1.0 + 2 * eps
    assert '"u_app"' in rep.to_json()


def test_vectorfield_exponents():
    rep = first_order_vectorfield_check(APPROX, np.geomspace(100, 10_000, 9),
                                        np.linspace(-0.9, 1.5, 25))
    eps = SPEC.epsilon
    assert rep.exponents["d_t"] <= -1 + 2 * eps
    assert abs(rep.exponents["S"] - rep.exponents["d_t"]) <= 0.2


def test_second_differences_bounded_across_cutoffs():
    # eta switches on [t0, 2 t0]; psi switches off near r = 1.5 t
    def d2t(k, t, r):
        return (eval_uapp(APPROX, t + k, r) - 2 * eval_uapp(APPROX, t, r) + eval_uapp(APPROX, t - k, r)) / k**2

    def d2r(k, t, r):
        return (eval_uapp(APPROX, t, r + k) - 2 * eval_uapp(APPROX, t, r) + eval_uapp(APPROX, t, r - k)) / k**2

    for fn, t, r in ((d2t, SPEC.t0, SPEC.t0 + 0.5), (d2t, 2 * SPEC.t0, 2 * SPEC.t0 + 0.5),
                     (d2r, 20.0, 30.0), (d2r, 20.0, 25.0)):
        vals = [abs(fn(k, t, r)) for k in (1e-2, 5e-3, 2.5e-3)]
        assert max(vals) < 10 * (min(vals) + 1e-3)


def test_negative_slow_time_frozen(caplog):
    a = ApproximateSolution(DATA, CutoffSpec(epsilon=0.1, delta=0.1, t0=1.0))
    t = 2.0  # eps ln 2 - 0.1 < 0
    with caplog.at_level("WARNING"):
        v = eval_uapp(a, t, t + 0.2)
    expect = 0.1 * float(a.spec.eta(t)) * integrate_U(DATA, 0.0, 0.2) / (t + 0.2) * float(psi_cutoff((t + 0.2) / t))
    assert v == pytest.approx(expect, rel=1e-14)
    assert "outside the model" in caplog.text

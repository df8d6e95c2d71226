import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blowave.asymptotic_system import (AsymptoticData, BlowupReached, SignCertificate,
                                       asymptotic_lifespan, asymptotic_profile, decay_rate_U,
                                       integrate_U, solve_Uq, uq_closed_form)
from blowave.data import make


def data_of(name, **kw):
    return AsymptoticData.from_datum(make(name, **kw))


BUMP = data_of("bump", a=1.0, w=1.0)
BUMP_MASS = 1.2069003224378774  # int of exp(1 - 1/(1 - q^2)) over [-1, 1]


def test_bump_mass_oracle():
    q = np.linspace(-1, 1, 2_000_001)
    assert abs(np.trapezoid(make("bump")(q), q) - BUMP_MASS) < 1e-9


@given(st.floats(-5, 5), st.floats(0.01, 50))
def test_closed_form_satisfies_ode(a, s):
    if a * s + 2 <= 0.1:
        return
    k = 1e-4 * (1 + s)
    f = lambda x: uq_closed_form(a, x)  # noqa: E731
    ds = (f(s + k) - f(s - k)) / (2 * k)
    assert abs(2 * ds + f(s) ** 2) < 1e-5 * (1 + f(s) ** 2)
    assert uq_closed_form(a, 0.0) == pytest.approx(a)


def test_random_closed_form_pairs():
    rng = np.random.default_rng(0)
    a = rng.uniform(-3, 3, 10_000)
    s = rng.uniform(0, 0.6, 10_000)
    d = AsymptoticData(lambda q, omega=None: q, support_radius=10.0)
    got = solve_Uq(d, s, a)
    np.testing.assert_allclose(got, 2 * a / (a * s + 2), rtol=1e-14, atol=1e-15)


def test_zero_datum_and_blowup_error():
    zero = data_of("zero")
    assert solve_Uq(zero, 12.0, 0.3) == 0.0
    assert np.all(integrate_U(zero, 5.0, np.linspace(-2, 2, 9)) == 0.0)
    neg = data_of("bump", a=-0.5)
    with pytest.raises(BlowupReached) as err:
        solve_Uq(neg, 4.0, 0.0)
    assert err.value.s == 4.0 and err.value.q == 0.0
    with pytest.raises(BlowupReached):
        integrate_U(neg, 4.5, 1.0)


def test_lifespans():
    assert asymptotic_lifespan(BUMP) == math.inf
    assert asymptotic_lifespan(data_of("bump", a=-0.5)) == pytest.approx(4.0)
    assert asymptotic_lifespan(data_of("bump", a=-2.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        asymptotic_lifespan(BUMP, lattice=[])


def test_sign_certificate():
    assert BUMP.sign_certificate is SignCertificate.NONNEGATIVE
    mixed = AsymptoticData(lambda q, omega=None: np.sin(3 * q) * make("bump", w=2.0)(q),
                           support_radius=2.0)
    assert mixed.sign_certificate is SignCertificate.MIXED_SIGN


def test_non_compact_data_need_decay():
    with pytest.raises(ValueError):
        AsymptoticData(lambda q, omega=None: q * 0)
    with pytest.raises(ValueError):
        AsymptoticData(lambda q, omega=None: q * 0, gamma=1.0)


def test_integral_at_s_zero_is_mass():
    for q in (1.0, 1.5, 3.0):
        assert abs(integrate_U(BUMP, 0.0, q) - BUMP_MASS) < 1e-6
    q = np.linspace(-3, -1, 7)
    assert np.all(integrate_U(BUMP, 2.0, q) == 0.0)


def test_integral_derivative_matches_uq():
    q = np.linspace(-0.8, 0.8, 9)
    k = 1e-3
    for s in (0.0, 3.0, 30.0):
        fd = (integrate_U(BUMP, s, q + k, step=1e-4) - integrate_U(BUMP, s, q - k, step=1e-4)) / (2 * k)
        assert np.max(np.abs(fd - solve_Uq(BUMP, s, q))) < 1e-5


def test_decay_slopes():
    fit = decay_rate_U(BUMP)
    assert -1.1 <= fit.slope <= -0.9
    slow = data_of("powerlaw", gamma=2.0)
    fit2 = decay_rate_U(slow, q_fixed=0.0)
    assert -0.6 <= fit2.slope <= -0.4
    with pytest.raises(ValueError):
        decay_rate_U(data_of("zero"))
    with pytest.raises(ValueError):
        decay_rate_U(BUMP, s_min=100, s_max=500)


def test_pde_residual_second_order():
    q = np.linspace(-0.9, 0.9, 19)
    s = 2.0
    errs = []
    for k in (0.1, 0.05, 0.025):
        d = (solve_Uq(BUMP, s + k, q) - solve_Uq(BUMP, s - k, q)) / (2 * k)
        errs.append(np.max(np.abs(2 * d + solve_Uq(BUMP, s, q) ** 2)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2) < 0.2)


def test_mixed_sign_blowup_is_monotone():
    neg = data_of("bump", a=-0.5)
    s = np.linspace(0, 3.99, 50)
    vals = np.abs(solve_Uq(neg, s, 0.0))
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] > 100


@given(st.floats(0.1, 3), st.floats(0.3, 3), st.floats(0, 200))
def test_sign_preservation(a, w, s):
    d = data_of("bump", a=a, w=w)
    q = np.linspace(-w - 0.5, w + 0.5, 41)
    assert np.all(solve_Uq(d, s, q) >= 0)
    assert np.all(np.diff(integrate_U(d, s, q, step=1e-2)) >= -1e-15)


def test_profile_and_csv():
    prof = asymptotic_profile(data_of("bump", a=-0.5), [0, 1, 3, 5], np.linspace(-2, 2, 5))
    assert prof.lifespan == pytest.approx(4.0)
    assert prof.U.shape == (3, 5)  # s = 5 is past the lifespan
    assert np.all(np.isfinite(prof.U))
    lines = prof.to_csv().splitlines()
    assert lines[0] == "s,q,U,U_q" and len(lines) == 16
    assert '"lifespan": 4.0' in prof.summary_json()
    assert asymptotic_profile(BUMP, [0, 1], [0.0]).summary()["lifespan"] == "inf"

import math

import numpy as np
import pytest

from blowave.approximate_solution import ApproximateSolution
from blowave.asymptotic_system import AsymptoticData
from blowave.data import make
from blowave.radial_fields import RadialGrid, RadialProfile, SpacetimeField, sample_function
from blowave.semilinear_solver import (BackwardProblemSpec, SolveStatus, cauchy_gap,
                                       constructed_solution, energy, scheme_residual,
                                       slice_energy, solve_backward, solve_forward)


def profile(grid, datum):
    return sample_function(datum, grid)


def test_zero_data_stays_zero():
    g = RadialGrid.from_spacing(10.0, 0.1)
    z = profile(g, make("zero"))
    out = solve_forward(z, z, 5.0)
    assert out.status is SolveStatus.COMPLETED
    assert np.all(out.field.values == 0.0)
    assert energy(out.field, 2.0) == 0.0


def test_cfl_rejected():
    g = RadialGrid.from_spacing(10.0, 0.1)
    z = profile(g, make("zero"))
    for c in (1.5, 0.0):
        with pytest.raises(ValueError, match="CFL"):
            solve_forward(z, z, 1.0, cfl=c)
    with pytest.raises(ValueError, match="CFL"):
        BackwardProblemSpec(AsymptoticData.from_datum(make("zero")), cfl=1.5)


def test_boundary_precondition():
    g = RadialGrid.from_spacing(5.0, 0.1)
    u = profile(g, make("bump", w=2.0))
    with pytest.raises(ValueError, match="r_max"):
        solve_forward(u, u, 4.0)
    with pytest.raises(ValueError):
        solve_forward(u, u, 6.0, domain_of_dependence=True)


def test_ode_blowup_time():
    # spatially constant u1 = 1: u_t = 1/(1 - t) blows up at t = 1
    g = RadialGrid.from_spacing(4.0, 1 / 128)
    out = solve_forward(profile(g, make("zero")), profile(g, make("constant", a=1.0)), 1.5,
                        domain_of_dependence=True)
    assert out.status is SolveStatus.BLEW_UP
    assert abs(out.t_blow - 1.0) < 0.02
    assert out.max_dtu_trace[-1, 1] > 1e6  # blow-up means the threshold was crossed
    lo, hi = out.blowup.bracket
    assert lo <= out.t_blow <= hi
    # before blow-up the center follows -ln(1 - t)
    i = out.field.time_index(0.5)
    assert abs(out.field.u_values()[i, 0] + math.log(0.5)) < 1e-3


@pytest.mark.parametrize("lagged,order", [(False, 2.0), (True, 1.0)])
def test_log_solution_residual_order(lagged, order):
    C = 1.0
    w = lambda t, r: -r * np.log(t + C)  # noqa: E731
    g = RadialGrid.from_spacing(5.0, 0.1)
    dts = [0.04, 0.02, 0.01, 0.005]
    res = [scheme_residual(w, 1.0, g, dt, lagged) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(res), 1)[0]
    assert abs(slope - order) < 0.3


def _smooth_run(h, t_max=2.0):
    g = RadialGrid.from_spacing(10.0, h)
    u0 = profile(g, make("gaussian", a=0.3))
    u1 = profile(g, make("gaussian", a=0.2, s=1.5))
    out = solve_forward(u0, u1, t_max, cfl=0.5, store_every=int(round(t_max / (0.5 * h))))
    assert out.status is SolveStatus.COMPLETED
    return out.field.u_values()[-1][::int(round(0.1 / h))]


def test_second_order_convergence():
    ref = _smooth_run(0.0125)
    errs = [np.max(np.abs(_smooth_run(h) - ref)) for h in (0.1, 0.05)]
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_domain_of_dependence():
    g = RadialGrid.from_spacing(12.0, 0.05)
    base0 = profile(g, make("bump", a=0.3, w=1.0))
    pert = profile(g, make("bump", a=0.3, w=0.5, center=4.0))  # support [3.5, 4.5]
    z = profile(g, make("zero"))
    a = solve_forward(base0, z, 2.0, cfl=1.0)
    b = solve_forward(base0 + pert, z, 2.0, cfl=1.0)
    i = a.field.time_index(2.0)
    j = int(round(1.0 / g.h))  # probe (t, r) = (2, 1); its backward cone reaches r = 3
    diff = abs(a.field.u_values()[i, j] - b.field.u_values()[i, j])
    assert diff < 1e-10


def test_linear_energy_conserved():
    g = RadialGrid.from_spacing(30.0, 0.02)
    u0 = profile(g, make("bump", a=1.0, w=2.0))
    u1 = profile(g, make("bump", a=0.5, w=1.0))
    out = solve_forward(u0, u1, 20.0, nonlinearity=0.0)
    e = out.energy_trace[:, 1]
    assert np.max(np.abs(e / e[0] - 1)) < 5e-3


def test_standing_profile_energy():
    g = RadialGrid.from_spacing(8.0, 0.01)
    u = np.exp(-g.r**2)
    got = slice_energy(u, np.zeros_like(u), g)
    rf = np.linspace(0, 8, 1_000_001)
    oracle = 4 * math.pi * np.trapezoid((2 * rf * np.exp(-rf**2)) ** 2 * rf**2, rf)
    assert abs(got - oracle) / oracle < 1e-4


def test_energy_of_zero_field():
    g = RadialGrid(5.0, 11)
    f = SpacetimeField(0.0, 0.25, g, np.zeros((3, 11)))
    assert energy(f, 0.25) == 0.0


def test_energy_trace_sorted_and_csv():
    g = RadialGrid.from_spacing(15.0, 0.05)
    out = solve_forward(profile(g, make("bump", a=0.2)), profile(g, make("zero")), 5.0)
    assert np.all(np.diff(out.energy_trace[:, 0]) > 0)
    assert out.energy_csv().splitlines()[0] == "t,energy"
    assert out.max_dtu_csv().splitlines()[0] == "t,max_abs_dtu"
    assert '"Completed"' in out.summary_json()


def test_backends_agree():
    g = RadialGrid.from_spacing(10.0, 0.05)
    u0, u1 = profile(g, make("bump", a=0.5)), profile(g, make("bump", a=0.5, w=2.0))
    a = solve_forward(u0, u1, 4.0, backend="numpy")
    b = solve_forward(u0, u1, 4.0, backend="numba")
    np.testing.assert_allclose(a.field.values, b.field.values, rtol=1e-12, atol=1e-14)


# -- backward problem ------------------------------------------------------
BUMP = AsymptoticData.from_datum(make("bump", a=1.0, w=1.0))


@pytest.fixture(scope="module")
def backward_25():
    spec = BackwardProblemSpec(BUMP, epsilon=0.1, T=25.0, h=0.1)
    return spec, solve_backward(spec)


def test_backward_zero_data():
    spec = BackwardProblemSpec(AsymptoticData.from_datum(make("zero")), T=5.0)
    out = solve_backward(spec)
    assert out.status is SolveStatus.COMPLETED
    assert np.all(out.field.values == 0.0)
    assert cauchy_gap(out, out) == 0.0
    u, ut = constructed_solution(out, spec, 0.0)
    assert np.all(u.values == 0) and np.all(ut.values == 0)


def test_backward_rejects_mixed_sign():
    mixed = AsymptoticData(lambda q, omega=None: -make("bump")(q), support_radius=1.0)
    with pytest.raises(ValueError):
        solve_backward(BackwardProblemSpec(mixed, T=5.0))


def test_backward_time_axis(backward_25):
    spec, out = backward_25
    assert out.status is SolveStatus.COMPLETED
    assert out.field.t_start == 0.0
    assert out.field.t_end == pytest.approx(2 * spec.T)
    assert np.all(out.field.values[-1] == 0.0)  # v = 0 at t = 2T


def test_backward_vanishes_behind_characteristic(backward_25):
    spec, out = backward_25
    fld = out.field
    u = fld.u_values()
    R = spec.data.support_radius
    for i in range(fld.n_times):
        t = fld.t_start + i * fld.dt
        mask = fld.grid.r - t <= -R
        # the center value is extrapolated from r = h, 2h; skip it on the boundary line
        if t - R < 2 * fld.grid.h:
            mask[0] = False
        if mask.any():
            assert np.max(np.abs(u[i, mask])) < 1e-8
            assert np.max(np.abs(fld.values[i, fld.grid.r - t <= -R])) < 1e-8


def test_gap_of_identical_runs_is_zero(backward_25):
    _, out = backward_25
    assert cauchy_gap(out, out) == 0.0


def test_gap_rejects_grid_mismatch(backward_25):
    spec, out = backward_25
    other = BackwardProblemSpec(BUMP, T=5.0, h=0.05)
    with pytest.raises(ValueError, match="resample"):
        cauchy_gap(out, other)


def test_forward_reproduces_backward(backward_25):
    spec, out = backward_25
    u0, u1 = constructed_solution(out, spec, 0.0)
    fwd = solve_forward(u0, u1, spec.T, cfl=1.0, domain_of_dependence=True)
    assert fwd.status is SolveStatus.COMPLETED
    n = int(round((u0.grid.r_max - spec.T) / u0.grid.h))
    r = u0.grid.r[:n]
    for t in (12.0, spec.T):
        u_b, _ = constructed_solution(out, spec, t)
        u_f = fwd.field.u_values()[fwd.field.time_index(t)]
        num = np.sqrt(np.trapezoid((u_f[:n] - u_b.values[:n]) ** 2 * r**2, r))
        den = np.sqrt(np.trapezoid(u_b.values[:n] ** 2 * r**2, r))
        assert num / den < 0.05


def test_tail_lower_bound():
    from blowave.semilinear_solver import tail_lower_bound
    g = RadialGrid.from_spacing(50.0, 0.1)
    u = RadialProfile(g, 0.3 / ((1 + g.r) * (1 + np.log1p(g.r))))
    tb = tail_lower_bound(u, 2.0, 25.0)
    assert tb.sign_change_at is None and 0.15 < tb.c <= 0.3
    flipped = RadialProfile(g, np.where(g.r > 10.05, -1.0, 1.0) * u.values)
    tb2 = tail_lower_bound(flipped, 2.0, 25.0)
    assert tb2.c == 0.0 and 10.0 < tb2.sign_change_at < 10.1
    with pytest.raises(ValueError):
        tail_lower_bound(u, 0.5, 25.0)

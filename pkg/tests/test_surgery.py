import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from reeblab import mobius as mb
from reeblab.errors import OutOfChart, ParamViolation
from reeblab.surgery import (
    BetaProfile,
    ChartMap,
    RProfile,
    SurgeryParams,
    TwistData,
    box_traverse,
    build_chart,
    validate_params,
)


def test_width_bound_for_q2():
    p = SurgeryParams(q=2, eta=0.1, eps=0.003)
    assert p.eps_max == pytest.approx(0.1 / (8 * math.pi))
    assert p.eps_max == pytest.approx(0.0039789, abs=1e-7)
    assert validate_params(p).ok


def test_q0_is_surgery_free():
    p = SurgeryParams(q=0, eta=0.1, eps=0.09)
    assert validate_params(p).ok
    tw = TwistData(p)
    w = np.linspace(-2 * p.eps, 2 * p.eps, 51)
    assert np.all(tw.f(w) == 0)
    assert np.all(tw.r(0.05, w) == 0)


def test_width_bound_violation():
    p = SurgeryParams(q=1, eta=0.1, eps=2 * 0.1 / (4 * math.pi))
    with pytest.raises(ParamViolation) as err:
        validate_params(p)
    assert err.value.constraint == "eps_bound"


def test_nonpositive_params_rejected():
    with pytest.raises(ParamViolation):
        validate_params(SurgeryParams(eta=0.0))


def test_collar_warning():
    rep = validate_params(SurgeryParams(delta=0.05))
    assert rep.warnings
    assert not validate_params(SurgeryParams(delta=0.5)).warnings


@given(st.floats(-1.5, 1.5))
def test_R_profile_is_integral_of_derivative(u):
    R = RProfile()
    oracle = quad(lambda x: float(R.derivative(x)), -1.0, max(-1.0, min(u, 1.0)), epsabs=1e-12, points=[-0.95, -0.65, 0.65, 0.95])[0]
    assert float(R.value(u)) == pytest.approx(oracle, abs=1e-9)


def test_R_profile_constraints():
    R = RProfile()
    u = np.linspace(-1, 1, 4001)
    d = R.derivative(u)
    assert np.allclose(d, d[::-1])
    assert d.min() >= 0 and d.max() <= 4
    assert float(R.value(-1.0)) == 0.0
    assert float(R.value(1.0)) == pytest.approx(2 * math.pi, abs=1e-14)
    assert float(R.value(0.0)) == pytest.approx(math.pi, abs=1e-14)


def test_beta_profile_constraints():
    B, eta = BetaProfile(), 0.1
    t = np.linspace(-4 * eta, 4 * eta, 8001)
    v, d = B.value(t, eta), B.derivative(t, eta)
    assert np.all(v[np.abs(t) <= 2 * eta] == 1.0)
    assert np.all(v[np.abs(t) >= 3 * eta] == 0.0)
    assert np.abs(d).max() <= math.pi / eta
    # derivative against central differences
    h = 1e-7
    fd = (B.value(t + h, eta) - B.value(t - h, eta)) / (2 * h)
    assert np.allclose(fd, d, atol=1e-5)


@given(st.floats(-3, 3))
def test_twist_outside_support(q_scale):
    q = int(round(q_scale)) or 1
    p = SurgeryParams(q=q, eps=0.9 * 0.1 / (4 * abs(q) * math.pi))
    tw = TwistData(p)
    assert float(tw.f(-1.5 * p.eps)) == 0.0
    assert float(tw.f(1.5 * p.eps)) == pytest.approx(-2 * math.pi * q)


@settings(max_examples=30, deadline=None)
@given(st.integers(-3, 3), st.floats(-2, 2))
def test_first_moment_matches_quadrature(q, x):
    p = SurgeryParams(q=q, eps=0.9 * 0.1 / (4 * max(abs(q), 1) * math.pi))
    tw = TwistData(p)
    w = x * p.eps
    oracle = quad(lambda y: y * float(tw.f_prime(y)), -2 * p.eps, w, points=[-0.95 * p.eps, -0.65 * p.eps, 0.65 * p.eps, 0.95 * p.eps], epsabs=1e-14, epsrel=1e-12)[0]
    assert float(tw.I(w)) == pytest.approx(oracle, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(-6, 6).filter(bool), st.floats(0.02, 0.5), st.floats(0.05, 0.999))
def test_contact_condition_under_width_bound(q, eta, frac):
    p = SurgeryParams(q=q, eta=eta, eps=frac * eta / (4 * abs(q) * math.pi))
    rep = validate_params(p, grid=120)
    assert rep.sup_r_t < 1.0


def test_traverse_without_surgery():
    p = SurgeryParams(q=0, eps=0.003)
    for w in np.linspace(-0.0059, 0.0059, 7):
        s, w2, tau = box_traverse((1.0, w), p)
        assert s == pytest.approx(1.0) and w2 == w and tau == pytest.approx(6 * p.eta, abs=1e-15)


def test_traverse_below_support():
    p = SurgeryParams()
    s, _, tau = box_traverse((0.4, -2 * p.eps), p)
    assert s == pytest.approx(0.4, abs=1e-15)
    assert tau == pytest.approx(6 * p.eta, abs=1e-15)


def _ode_traversal(p, w):
    """Integrate dt/dtau = 1 / (1 +- r_t) from the entry wall to the exit wall."""
    tw = TwistData(p)
    ts = p.t_switch
    first = solve_ivp(lambda tau, t: [1.0 / (1.0 + float(tw.r_t(t[0], w)))], (0, 1), [-3 * p.eta],
                      events=lambda tau, t: t[0] - ts, rtol=1e-13, atol=1e-15, max_step=p.eta / 20)
    tau1 = float(first.t_events[0][0])
    second = solve_ivp(lambda tau, t: [1.0 / (1.0 - float(tw.r_t(t[0], w)))], (0, 1), [ts],
                       events=lambda tau, t: t[0] - 3 * p.eta, rtol=1e-13, atol=1e-15, max_step=p.eta / 20)
    return tau1 + float(second.t_events[0][0])


@pytest.mark.parametrize("q", [-3, -1, 1, 2, 3])
def test_traversal_time_matches_ode(q):
    p = SurgeryParams(q=q, eps=0.9 * 0.1 / (4 * abs(q) * math.pi))
    for x in (0.0, -0.7, 0.4, 1.3):
        w = x * p.eps
        _, _, tau = box_traverse((0.0, w), p)
        assert tau == pytest.approx(_ode_traversal(p, w), abs=1e-8)


def test_shift_at_centre():
    p = SurgeryParams(q=1)
    s, _, _ = box_traverse((1.0, 0.0), p)
    assert (s - 1.0) % (2 * math.pi) == pytest.approx((-math.pi) % (2 * math.pi), abs=1e-12)


@pytest.fixture(scope="module")
def chart(surface):
    return build_chart(surface, SurgeryParams())


def test_chart_centre_is_legendrian_lift(chart):
    for s in np.linspace(0, 2 * math.pi, 9):
        g = chart.frame(0.0, s, 0.0)
        z = mb.base_point(g)
        assert abs(z.real) < 1e-12
        assert z.imag == pytest.approx(math.exp(s * chart.scale))
        # perpendicular to the upward axis
        assert abs(math.sin(mb.direction_angle(g))) < 1e-12


def test_chart_round_trip(chart, rng):
    p = SurgeryParams()
    pts = np.column_stack(
        [rng.uniform(-3 * p.eta, 3 * p.eta, 500), rng.uniform(0, 2 * math.pi, 500), rng.uniform(-2 * p.eps, 2 * p.eps, 500)]
    )
    for t, s, w in pts:
        got = chart.coordinates(chart.frame(t, s, w))
        assert np.allclose(got, (t, s, w), atol=1e-9)


def test_chart_pullback_normal_form(chart, rng):
    p, h = SurgeryParams(), 1e-6
    for _ in range(200):
        t, s, w = rng.uniform(-3 * p.eta, 3 * p.eta), rng.uniform(0, 2 * math.pi), rng.uniform(-1.9 * p.eps, 1.9 * p.eps)
        g = chart.frame(t, s, w)
        comps = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            d = (chart.frame(*(np.array([t, s, w]) + e)) - chart.frame(*(np.array([t, s, w]) - e))) / (2 * h)
            comps.append(mb.liouville(g, d))
        assert np.allclose(comps, (1.0, w, 0.0), atol=1e-6)


def test_chart_rejects_far_frames(chart):
    with pytest.raises(OutOfChart):
        chart.coordinates(chart.frame(0.5, 1.0, 0.0))
    with pytest.raises(OutOfChart):
        ChartMap(2.0, 0.1, 0.003).frame(0.0, 0.0, 5.0)

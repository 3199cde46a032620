import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from reeblab import mobius as mb
from reeblab.errors import NotHyperbolic
from reeblab.mobius import MobiusElement, UnitTangentFrame, geodesic_step

angles = st.floats(-math.pi, math.pi)
reals = st.floats(-3.0, 3.0)
heights = st.floats(0.2, 5.0)


def random_sl2(draw_a, draw_b, draw_c):
    # product of a translation, a rotation and a flow matrix is in SL(2, R)
    return mb.translation_matrix(complex(draw_a, math.exp(draw_b))) @ mb.rotation_matrix(draw_c)


def test_translation_length_matches_axis_displacement():
    m = np.array([[2.0, 1.0], [1.0, 1.0]])
    # fixed points solve z^2 - z - 1 = 0; the top of the axis is 1/2 + i sqrt(5)/2
    top = 0.5 + 1j * math.sqrt(5) / 2
    disp = mb.hyperbolic_distance(top, mb.apply(m, top))
    assert abs(mb.translation_length(m) - 2 * math.acosh(1.5)) < 1e-12
    assert abs(disp - 2 * math.acosh(1.5)) < 1e-12


def test_elliptic_has_no_translation_length():
    import pytest

    with pytest.raises(NotHyperbolic):
        mb.translation_length(mb.rotation_matrix(0.3))


@given(st.floats(0.01, 20.0))
def test_trace_for_length_inverts_translation_length(length):
    t = mb.trace_for_length(length)
    m = np.diag([t / 2 + math.sqrt(t * t / 4 - 1), t / 2 - math.sqrt(t * t / 4 - 1)])
    assert math.isclose(mb.translation_length(m), length, rel_tol=1e-9, abs_tol=1e-9)


@given(reals, reals, heights, reals, heights, st.floats(-2, 2), angles)
def test_distance_is_symmetric_and_invariant(x1, x2, y1, y2_re, y2, s, phi):
    z, w = complex(x1, y1), complex(y2_re, y2)
    g = random_sl2(x2, s, phi)
    d = mb.hyperbolic_distance(z, w)
    assert math.isclose(d, mb.hyperbolic_distance(w, z), rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(d, mb.hyperbolic_distance(mb.apply(g, z), mb.apply(g, w)), rel_tol=1e-8, abs_tol=1e-9)


@given(reals, heights, angles, st.floats(0.0, 6.0))
def test_geodesic_flow_moves_base_point_at_unit_speed(x, y, angle, t):
    g = mb.frame_matrix(complex(x, y), angle)
    d = mb.hyperbolic_distance(mb.base_point(g), mb.base_point(g @ mb.flow_matrix(t)))
    assert abs(d - t) < 1e-8 * max(1.0, t)


@given(reals, heights, angles)
def test_frame_matrix_round_trip(x, y, angle):
    g = mb.frame_matrix(complex(x, y), angle)
    assert abs(mb.base_point(g) - complex(x, y)) < 1e-10 * max(1.0, y)
    d = (mb.direction_angle(g) - angle + math.pi) % (2 * math.pi) - math.pi
    assert abs(d) < 1e-10


def test_liouville_form_on_flow_and_rotation():
    g = mb.frame_matrix(0.3 + 1.7j, 0.4)
    h = 1e-6
    flow_dir = (g @ mb.flow_matrix(h) - g @ mb.flow_matrix(-h)) / (2 * h)
    rot_dir = (g @ mb.rotation_matrix(h) - g @ mb.rotation_matrix(-h)) / (2 * h)
    assert abs(mb.liouville(g, flow_dir) - 1.0) < 1e-9
    assert abs(mb.liouville(g, rot_dir)) < 1e-9


def test_element_algebra():
    a = MobiusElement([[2, 1], [1, 1]])
    assert (a @ a.inverse()).isclose(MobiusElement.identity())
    assert (a**3).isclose(a @ a @ a)
    assert abs(a.trace - 3.0) < 1e-15


def test_geodesic_step_composes():
    u = UnitTangentFrame.identity()
    assert geodesic_step(geodesic_step(u, 0.7), 1.1).isclose(geodesic_step(u, 1.8))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reeblab import mobius as mb
from reeblab.errors import BadParams
from reeblab.surface import FenchelNielsen, build_genus2_surface, fricke_commutator_trace
from reeblab.words import SURFACE_RELATOR


def hand_fricke(x, y, z):
    return x * x + y * y + z * z - x * y * z - 2


def test_fricke_identity_by_hand():
    assert fricke_commutator_trace(3, 3, 4) == pytest.approx(hand_fricke(3, 3, 4)) == -4


def test_boundary_trace_and_separating_length(surface):
    ab = surface.evaluate("abAB")
    assert np.trace(ab) == pytest.approx(-4.0, abs=1e-9)
    assert surface.axis_length == pytest.approx(2 * math.acosh(2), abs=1e-9)
    assert surface.axis_length == pytest.approx(2.63392, abs=1e-5)


def test_relator_vanishes(surface):
    m = surface.evaluate(SURFACE_RELATOR)
    assert min(np.abs(m - np.eye(2)).max(), np.abs(m + np.eye(2)).max()) < 1e-9


def test_mismatched_boundaries_rejected():
    with pytest.raises(BadParams):
        build_genus2_surface(FenchelNielsen(handle2=(3.0, 3.0, 4.5)))


def test_domain_area_and_pairing(surface):
    # Gauss-Bonnet: area of a genus-2 hyperbolic surface is 4 pi
    assert surface.domain.area == pytest.approx(4 * math.pi, abs=1e-6)
    assert surface.domain.pairing_error() < 1e-7


def test_separating_axis_conjugate_to_boundaries(surface):
    t = abs(surface.separating_axis.trace)
    assert t == pytest.approx(abs(np.trace(surface.evaluate("abAB"))), rel=1e-9)
    assert t == pytest.approx(abs(np.trace(surface.evaluate("cdCD"))), rel=1e-9)


def test_reduce_base_point_is_trivial(surface):
    z, word = surface.reduce_to_domain(surface.domain.x0)
    assert abs(z - surface.domain.x0) < 1e-12
    assert word == ""


def test_reduce_generator_image(surface):
    x0 = surface.domain.x0
    for s in surface.domain.sides[:4]:
        z, path = surface.domain.reduce_point(mb.apply(s.element, x0))
        assert abs(z - x0) < 1e-9
        assert np.allclose(np.abs(surface.domain.element_of(path)), np.abs(s.element), atol=1e-9)


def test_far_point_round_trip(surface, rng):
    x0 = surface.domain.x0
    for angle in rng.uniform(0, 2 * np.pi, 10):
        p = mb.base_point(mb.frame_matrix(x0, angle) @ mb.flow_matrix(20.0))
        z, path = surface.domain.reduce_point(p)
        assert surface.domain.contains(z)
        back = mb.apply(surface.domain.element_of(path), z)
        assert abs(back - p) < 1e-9 * max(1.0, abs(p))
        # each side move displaces the base point by at most twice the circumradius
        assert len(path) >= math.ceil(20.0 / (2 * surface.domain.circumradius)) - 1


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.3, 4), st.integers(0, 7))
def test_reduction_is_deck_equivariant(surface, x, y, k):
    p = complex(x, y)
    side = surface.domain.sides[k % len(surface.domain.sides)]
    z1, _ = surface.domain.reduce_point(p)
    z2, _ = surface.domain.reduce_point(mb.apply(side.element, p))
    # boundary points may land on either paired side; compare mod the ball
    if abs(z1 - z2) > 1e-8:
        imgs = mb.apply(surface.ball(2 * surface.domain.circumradius).transpose(1, 2, 0), z1)
        assert np.min(np.abs(imgs - z2)) < 1e-8


def test_ball_is_complete_against_word_search(surface):
    x0 = surface.domain.x0
    radius = 5.0
    ball = surface.ball(radius)
    pts = mb.apply(ball.transpose(1, 2, 0), x0)
    gens = surface.generator_matrices
    table = list(gens.values()) + [np.linalg.inv(m) for m in gens.values()]
    frontier = [np.eye(2)]
    for _ in range(3):
        frontier = [m @ g for m in frontier for g in table]
        for m in frontier:
            z = mb.apply(m, x0)
            if mb.hyperbolic_distance(x0, z) <= radius - 1e-9:
                assert np.min(np.abs(pts - z)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.text(alphabet="abcdABCD", min_size=1, max_size=6), st.text(alphabet="abcdABCD", max_size=5))
def test_translation_length_is_conjugation_invariant(surface, w, g):
    m = surface.evaluate(w)
    if abs(np.trace(m)) <= 2 + 1e-6:
        return
    c = surface.evaluate(g)
    l1 = mb.translation_length(m)
    l2 = mb.translation_length(c @ m @ np.linalg.inv(c))
    assert abs(l1 - l2) < 1e-10 * max(1.0, l1) * max(1.0, np.abs(c).max() ** 2)


def test_power_law_for_translation_length(surface):
    m = surface.evaluate("ab")
    assert mb.translation_length(m @ m @ m) == pytest.approx(3 * mb.translation_length(m), rel=1e-10)


def test_closed_geodesic_returns_under_reduction(surface):
    from reeblab.surface import axis_frame

    m = surface.evaluate("aB")
    u = axis_frame(m)
    end = u @ mb.flow_matrix(mb.translation_length(m))
    assert np.allclose(np.abs(np.linalg.inv(m) @ end), np.abs(u), atol=1e-9)

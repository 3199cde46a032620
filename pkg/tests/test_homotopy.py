import math

import numpy as np
import pytest

from reeblab import mobius as mb
from reeblab.census import CensusTable, Side
from reeblab.flow import Geo
from reeblab.homotopy import (
    CrossingSequence,
    OneSidedClass,
    is_contractible,
    loop_distance,
    record_word,
    surgered_class,
    torus_counterexample,
)
from reeblab.orbits import census_orbits, separating_orbits
from reeblab.surface import walk_axis
from reeblab.words import SurfaceGroup, free_reduce, inverse


def same_class(G, u, v):
    return G.conjugate_eq(u, v) or G.conjugate_eq(u, inverse(v))


def axis_start(flow, rec):
    m = flow.surface.evaluate(rec.representative)
    return Geo(np.eye(2), walk_axis(flow.domain, m).start)


def test_closed_geodesic_word_matches_census(geodesic_flow, census6):
    G = SurfaceGroup()
    for rec in census6.records[::12][:15]:
        traj = geodesic_flow.flow(axis_start(geodesic_flow, rec), rec.length)
        assert same_class(G, record_word(traj, geodesic_flow).letters, rec.cyclic_word)


def test_word_is_base_point_independent(geodesic_flow, census6):
    G = SurfaceGroup()
    for rec in census6.records[5::20][:8]:
        start = axis_start(geodesic_flow, rec)
        w0 = record_word(geodesic_flow.flow(start, rec.length), geodesic_flow).letters
        for frac in (0.17, 0.5, 0.83):
            shifted = geodesic_flow.run(start, frac * rec.length)[0]
            w1 = record_word(geodesic_flow.flow(shifted, rec.length), geodesic_flow).letters
            assert G.conjugate_eq(w0, w1)


def test_forward_then_backward_is_trivial(flow, rng):
    g = mb.frame_matrix(flow.domain.x0, 0.7)
    fwd = flow.flow(g, 9.0)
    back = flow.flow(fwd.end, -9.0)
    assert free_reduce(record_word(fwd, flow).letters + record_word(back, flow).letters) == ""


def test_short_trajectory_inside_domain_has_empty_word(flow):
    g = mb.frame_matrix(flow.domain.x0, 0.3)
    assert record_word(flow.flow(g, 0.05), flow).letters == ""


def test_one_sided_census_orbit(flow, census6):
    s1 = [r for r in census6.records if r.side is Side.S1 and not r.boundary_parallel and r.collar_distance > flow.params.delta]
    rep = census_orbits(flow, CensusTable(s1[:3], census6.T_max), sides=(Side.S1,))
    assert rep.orbits
    for o in rep.orbits:
        cls = surgered_class(o.trajectory(flow), flow)
        assert isinstance(cls, OneSidedClass) and cls.side is Side.S1
        assert cls.word == o.crossing_class.cyclic_word
        assert not is_contractible(cls)


@pytest.fixture(scope="module")
def box_orbits(lab):
    through = [o for o in lab.orbit_report.orbits if not o.avoids_box]
    assert through
    return through


def test_box_orbits_cross_evenly_and_alternate(lab, box_orbits):
    flow = lab.flow
    for o in box_orbits:
        cls = surgered_class(o.trajectory(flow), flow)
        assert isinstance(cls, CrossingSequence)
        assert cls.crossing_count >= 2 and cls.crossing_count % 2 == 0
        assert cls.alternates()
        assert all(cls.relative_labels())
        assert not is_contractible(cls)


def test_every_found_orbit_is_non_contractible(lab):
    assert len(lab.orbit_report.orbits) >= 100
    assert not any(is_contractible(o.crossing_class) for o in lab.orbit_report.orbits)


def test_small_perturbation_keeps_crossing_sequence(lab, box_orbits):
    flow = lab.flow
    for o in box_orbits[:3]:
        c = o.trajectory(flow).crossings
        mid = flow.run(o.start, 0.5 * (c[0].time + c[1].time))[0]
        base = surgered_class(flow.flow(mid, o.period), flow, check_collar=False)
        frame = flow.endpoint_frame(mid)
        # the box twist magnifies w-errors by about 1/eps, so the re-flowed kick stays tiny
        for kick in (1e-7, -1e-7):
            moved = flow.classify(frame @ mb.rotation_matrix(kick) @ mb.flow_matrix(kick))
            assert surgered_class(flow.flow(moved, o.period), flow, check_collar=False) == base


def test_separating_orbits_are_tangent(flow):
    for o in separating_orbits(flow):
        cls = surgered_class(o.trajectory(flow), flow)
        assert isinstance(cls, OneSidedClass)
        assert cls.tangent and cls.side is Side.S1


def test_contractibility_cases():
    assert is_contractible("")
    assert is_contractible("abABcdCD")
    assert not is_contractible("a")
    assert not is_contractible(OneSidedClass(None, "a", Side.S1))
    assert not is_contractible(CrossingSequence((("S1", "a"), ("S2", "c"))))


def test_torus_loops_close_in_distinct_primitive_classes():
    a, b = torus_counterexample(0.05)
    assert a.closes() and b.closes()
    assert a.is_primitive and b.is_primitive
    assert a.primitive_class[:2] == (1, 2) and b.primitive_class[:2] == (1, 3)
    assert a.primitive_class != b.primitive_class
    assert loop_distance(a, b) < 0.05


def test_torus_construction_scales():
    d1 = loop_distance(*torus_counterexample(0.05), samples=4001)
    d2 = loop_distance(*torus_counterexample(0.005), samples=4001)
    assert d1 / d2 >= 5


def test_torus_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        torus_counterexample(0.0)

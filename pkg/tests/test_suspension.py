import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reeblab.errors import EquivarianceViolation, NotIrreducible, ParamViolation
from reeblab.suspension import (
    MappingTorusModel,
    TransitionMatrix,
    check_equivariance,
    necklace_count,
    perron_root,
    suspension_periods,
)

GOLDEN = TransitionMatrix.from_array([[2, 1], [1, 1]])


def enumerate_cycles(M: TransitionMatrix, k: int) -> tuple[int, int, int]:
    """Closed edge walks, rotation classes and aperiodic classes by listing every edge sequence."""
    edges = [(i, j, m) for i in range(M.n) for j in range(M.n) for m in range(M.entries[i][j])]
    walks = []
    for seq in itertools.product(edges, repeat=k):
        if all(seq[r][1] == seq[(r + 1) % k][0] for r in range(k)):
            walks.append(seq)
    classes = {min(w[r:] + w[:r] for r in range(k)) for w in walks}
    aperiodic = sum(1 for c in classes if len({c[r:] + c[:r] for r in range(k)}) == k)
    return len(walks), len(classes), aperiodic


@pytest.mark.parametrize("rows", [[[2, 1], [1, 1]], [[1, 1], [1, 0]], [[0, 1, 1], [1, 0, 1], [1, 1, 1]]])
def test_counts_match_enumeration(rows):
    M = TransitionMatrix.from_array(rows)
    cen = necklace_count(M, 7)
    for k in range(1, 8):
        assert (cen.closed_walks[k - 1], cen.necklaces[k - 1], cen.aperiodic[k - 1]) == enumerate_cycles(M, k)


def test_full_two_shift():
    for rows in ([[2]], [[1, 1], [1, 1]]):
        cen = necklace_count(TransitionMatrix.from_array(rows), 3)
        assert (cen.closed_walks[2], cen.necklaces[2], cen.aperiodic[2]) == (8, 4, 2)


def test_first_count_is_the_trace():
    assert necklace_count(GOLDEN, 1).c(1) == 3


def test_walks_split_over_divisors():
    cen = necklace_count(GOLDEN, 12)
    for k in range(1, 13):
        assert sum(d * cen.aperiodic[d - 1] for d in range(1, k + 1) if k % d == 0) == cen.closed_walks[k - 1]


def test_traces_are_exact_integers():
    M = TransitionMatrix.from_array([[3, 2], [2, 3]])
    assert M.trace_power(20) == 5**20 + 1


def test_perron_root_of_golden_matrix():
    assert perron_root(GOLDEN) == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-10)


@pytest.mark.parametrize("rows", [[[1]], [[0, 1], [1, 0]], [[0, 0, 1], [1, 0, 0], [0, 1, 0]]])
def test_perron_root_of_permutations(rows):
    assert perron_root(TransitionMatrix.from_array(rows)) == pytest.approx(1.0, abs=1e-10)


def test_reducible_matrix_is_rejected():
    with pytest.raises(NotIrreducible):
        perron_root(TransitionMatrix.from_array([[1, 1], [0, 1]]))


def test_bad_matrices():
    with pytest.raises(ValueError):
        TransitionMatrix.from_array([[1, 2, 3], [1, 1, 1]])
    with pytest.raises(ValueError):
        TransitionMatrix.from_array([[1, -1], [1, 1]])


def test_text_round_trip():
    M = TransitionMatrix.from_array([[0, 1, 1], [1, 0, 2], [1, 1, 1]])
    assert TransitionMatrix.from_text(M.to_text()) == M
    assert TransitionMatrix.from_text("# monodromy\n2 1\n1 1  # row two\n") == GOLDEN


def test_growth_fit_matches_perron_root():
    cen = necklace_count(GOLDEN, 20)
    assert abs(cen.fit.a / math.log(perron_root(GOLDEN)) - 1) < 0.02


def test_suspension_periods_count_necklaces():
    cen = necklace_count(GOLDEN, 12)
    table = suspension_periods(cen)
    for k in range(1, 13):
        assert table.N(k) == cen.c(k)
        assert table.N(k + 0.5) == cen.c(k)
    assert table.N(0.5) == 0
    assert table.fit == cen.fit


def test_word_length_is_period():
    table = suspension_periods(necklace_count(GOLDEN, 8))
    assert table.counts[4] == table.N(5) - table.N(4) > 0


def test_only_unit_roof():
    with pytest.raises(ParamViolation):
        suspension_periods(necklace_count(GOLDEN, 4), roof=2.0)


def test_form_is_exact_where_interpolation_idles():
    m = MappingTorusModel()
    rng = np.random.default_rng(3)
    for t in rng.uniform(0.03, 0.99, 100) + rng.integers(-2, 3, 100):
        p = rng.uniform(-1, 1, 2)
        assert float(m.F(t)) in (0.0, 1.0)
        assert np.max(np.abs(m.pullback(t, p) - m.form(t, p))) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_form_is_deck_invariant(t, x, y):
    m = MappingTorusModel()
    p = np.array([x, y])
    assert np.max(np.abs(m.pullback(t, p) - m.form(t, p))) < 1e-9


def test_differential_matches_finite_differences():
    m = MappingTorusModel()
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(50):
        t = rng.uniform(0, 3)
        p = rng.uniform(-1, 1, 2)
        x = np.array([t, *p])
        J = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            J[j] = (m.form((x + e)[0], (x + e)[1:]) - m.form((x - e)[0], (x - e)[1:])) / (2 * h)
        assert np.max(np.abs(m.differential(t, p) - (J - J.T))) < 1e-6


def test_reeb_field_is_normalised_and_in_the_kernel():
    m = MappingTorusModel()
    rng = np.random.default_rng(5)
    for _ in range(100):
        t, p = rng.uniform(-1, 2), rng.uniform(-1, 1, 2)
        R = m.reeb(t, p)
        assert m.form(t, p) @ R == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(m.differential(t, p) @ R)) < 1e-12
        assert m.contact_volume(t, p) > 0


def test_zero_epsilon_is_rejected():
    with pytest.raises(ParamViolation):
        MappingTorusModel(epsilon=0.0)


def test_non_area_preserving_monodromy_is_rejected():
    with pytest.raises(ParamViolation):
        MappingTorusModel(A=np.array([[2.0, 0.0], [0.0, 1.0]]))


def test_equivariance_report():
    rep = check_equivariance(MappingTorusModel(), 500, np.random.default_rng(6))
    assert rep.passed and rep.max_error < 1e-9 and rep.flat_error < 1e-12
    assert rep.min_contact_volume > 0


def test_equivariance_detects_a_broken_deck_map():
    class Broken(MappingTorusModel):
        def H(self, t, p):
            return t - 1.0, p

    with pytest.raises(EquivarianceViolation):
        check_equivariance(Broken(), 50, np.random.default_rng(7))

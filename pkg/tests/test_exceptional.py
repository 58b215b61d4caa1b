import math

import numpy as np
import pytest

from bowenlab.cocycle import Repeller
from bowenlab.errors import DomainError, EmptySubshiftError, InputError, PropertyFailure, TheoremCheckFailure
from bowenlab.exceptional import (
    AvoidResult,
    AvoidSeries,
    AvoidSpec,
    avoid_series,
    bound_a,
    bound_b,
    build_avoid_sft,
    check_series,
    cylinders_containing,
    theorem_a_series,
    theorem_b_series,
    verify_avoidance,
)
from bowenlab.models import PerturbedDoubling, carpet_model, diagonal_torus, doubling, interval_sft

from conftest import GOLDEN_DIM, LOG_PHI


def nbonacci_dim(n):
    """Dimension of binary sequences without n consecutive zeros: log r / log 2,
    r the largest root of x^n = x^(n-1) + ... + 1."""
    r = max(abs(np.roots([1] + [-1] * n)))
    return math.log(r) / math.log(2)


def test_itinerary_words():
    assert cylinders_containing(doubling(), AvoidSpec(("0",), 2)) == [(0, 0)]
    assert cylinders_containing(doubling(), AvoidSpec(("1/3",), 3)) == [(0, 1, 0)]
    assert cylinders_containing(diagonal_torus(2, 3), AvoidSpec((0, 0), 2)) == [(0, 0)]


def test_closure_words_on_boundaries():
    assert cylinders_containing(doubling(), AvoidSpec(("0",), 2, "closure")) == [(0, 0), (1, 1)]
    words = cylinders_containing(diagonal_torus(2, 3), AvoidSpec((0, 0), 2, "closure"))
    assert len(words) == 4


def test_one_third_gives_four_two_blocks(dbl):
    sft, words = build_avoid_sft(dbl, AvoidSpec(("1/3",), 3))
    assert words == [(0, 1, 0)] and sft.n_states == 4


def test_itinerary_convention_gives_golden_mean(dbl):
    sft, _ = build_avoid_sft(dbl, AvoidSpec(("0",), 2))
    assert abs(math.log(sft.spectral_radius) - LOG_PHI) < 1e-12


def test_closure_convention_leaves_zero_entropy(dbl):
    series = avoid_series(dbl, ("0",), [2], theorem="a", convention="closure")
    assert series.rows[0].degenerate and series.rows[0].h_top < 1e-9


def test_target_validation(dbl):
    with pytest.raises(InputError):
        cylinders_containing(doubling(), AvoidSpec(("1.5",), 3))
    with pytest.raises(InputError):
        cylinders_containing(doubling(), AvoidSpec(("0", "0"), 3))
    with pytest.raises(InputError):
        AvoidSpec(("0",), 1)
    with pytest.raises(InputError):
        AvoidSpec(("zero",), 3)


def test_avoiding_everything_is_an_error():
    lone = Repeller.full(interval_sft(np.ones((1, 1)), [0.5], [0.0]))
    with pytest.raises(EmptySubshiftError):
        build_avoid_sft(lone, AvoidSpec(("0",), 2))


def test_target_outside_sft_forbids_nothing():
    cantor = Repeller.full(interval_sft(np.ones((2, 2)), [1 / 3, 1 / 3], [0, 2 / 3]))
    assert cylinders_containing(cantor.model, AvoidSpec(("1/2",), 4)) == []


def test_theorem_a_rows_match_nbonacci_oracle(dbl):
    series = theorem_a_series(dbl, ("0",), range(2, 13))
    for row in series.rows:
        assert abs(row.s_star - nbonacci_dim(row.depth)) < 1e-9
    first = series.rows[0]
    assert abs(first.eps_n - (math.log(2) - LOG_PHI)) < 1e-9
    assert abs(first.thm_a_bound - (1 - 2 * first.eps_n / (math.log(2) + first.eps_n))) < 1e-12
    assert series.final.s_star >= 0.999


def test_theorem_a_diag23(diag23):
    series = theorem_a_series(diag23, (0, 0), range(2, 6))
    s = [r.s_star for r in series.rows]
    assert np.all(np.diff(s) > 0)
    assert all(r.s_star >= r.thm_a_bound - 1e-6 for r in series.rows)


def test_theorem_b_golden(golden):
    series = theorem_b_series(golden, ("1",), range(2, 13))
    assert series.rows[0].degenerate
    assert abs(series.alpha0 - GOLDEN_DIM) < 1e-9
    assert GOLDEN_DIM - series.final.alpha0 < 0.05


def test_theorem_b_on_carpet():
    rep = Repeller.full(carpet_model(3, 2, [(0, 0), (0, 2), (1, 1), (1, 2)]))
    series = theorem_b_series(rep, (0, 0), range(2, 7))
    assert all(math.isnan(r.thm_a_bound) for r in series.rows)
    assert series.alpha0 - series.final.alpha0 < 0.01


def test_theorem_a_requires_reference(golden):
    with pytest.raises(DomainError):
        theorem_a_series(golden, ("1",), [3])
    with pytest.raises(DomainError):
        theorem_b_series(Repeller.full(PerturbedDoubling(0.05)), ("0",), [3])


def test_perturbed_theorem_a_series():
    series = theorem_a_series(Repeller.full(PerturbedDoubling(0.05)), ("0",), range(2, 7))
    assert series.final.s_star > 0.98


def test_bound_formulas():
    assert abs(bound_a(2, 0.1, math.log(2)) - (2 - 0.5 / (math.log(2) + 0.1))) < 1e-15
    lam = np.array([math.log(3), math.log(2)])
    assert abs(bound_b(2.0, 0.1, lam) - (2 - 0.5 / (math.log(3) + 0.1))) < 1e-15
    assert abs(bound_b(1.5, 0.1, lam) - (1.5 - 0.45 / (math.log(3) + 0.1))) < 1e-15
    assert abs(bound_b(0.5, 0.1, lam) - (0.5 - 0.15 / (math.log(2) + 0.1))) < 1e-15


def _row(depth, s_star, bound=0.0):
    return AvoidResult(depth, 4, 0.5, (0.7,), s_star, s_star, 0.1, bound, float("nan"))


def test_check_series_catches_violations():
    with pytest.raises(TheoremCheckFailure) as info:
        check_series(AvoidSeries((_row(2, 0.5, bound=0.9),), "a", float("nan"), float("nan")))
    assert info.value.row.depth == 2
    with pytest.raises(TheoremCheckFailure):
        check_series(AvoidSeries((_row(2, 0.6), _row(3, 0.5)), "a", float("nan"), float("nan")))


def test_rows_independent_of_threads(diag23):
    one = avoid_series(diag23, (0, 0), range(2, 6), threads=1).rows
    many = avoid_series(diag23, (0, 0), range(2, 6), threads=4).rows
    assert one == many


def test_orbits_avoid_forbidden_cores(dbl, diag23):
    for rep, spec in ((dbl, AvoidSpec(("1/3",), 6)), (diag23, AvoidSpec((0, 0), 3, "closure"))):
        sft, words = build_avoid_sft(rep, spec)
        assert verify_avoidance(rep.restrict(sft), words) == 10**6


def test_orbit_check_detects_entry(dbl):
    _, words = build_avoid_sft(dbl, AvoidSpec(("0",), 3))
    with pytest.raises(PropertyFailure) as info:
        verify_avoidance(dbl, words, orbits=50, length=200)
    assert info.value.witness["word"] == [0, 0, 0]

import math

import numpy as np
import pytest

from bowenlab.cocycle import Repeller
from bowenlab.dimension import (
    admissible_radius,
    bowen_root,
    box_dimension,
    caratheodory_dim,
    mcmullen_dim,
)
from bowenlab.errors import InputError, PreconditionError
from bowenlab.models import PerturbedDoubling, carpet_model, interval_sft
from bowenlab.symbolic import Sft

from conftest import GOLDEN_DIM

CANTOR = interval_sft(np.ones((2, 2)), [1 / 3, 1 / 3], [0, 2 / 3])


@pytest.mark.parametrize("family", ["sub", "super"])
def test_roots_on_full_shifts(dbl, diag23, family):
    assert abs(bowen_root(dbl, family).root - 1) < 1e-9
    assert abs(bowen_root(diag23, family).root - 2) < 1e-9


def test_golden_root_and_bracket(golden):
    res = bowen_root(golden, "sub")
    assert abs(res.root - GOLDEN_DIM) < 1e-9
    lo, hi = res.bracket
    assert lo <= GOLDEN_DIM <= hi and hi - lo <= 1e-10


def test_zero_entropy_is_degenerate():
    T = np.array([[0, 1], [1, 0]])
    cycle = Repeller.full(interval_sft(T, [0.5, 0.5], [0.0, 0.5]))
    res = bowen_root(cycle, "sub")
    assert res.degenerate and res.root == 0


def test_root_tolerance_floor(golden):
    with pytest.raises(InputError):
        bowen_root(golden, "sub", tol=1e-14)


def test_nonlinear_root_near_one():
    rep = Repeller.full(PerturbedDoubling(0.05))
    assert 0.999 <= bowen_root(rep, "super").root <= bowen_root(rep, "sub").root <= 1.0


@pytest.mark.parametrize("N", [4, 8, 12])
def test_caratheodory_equals_bowen_root(golden, diag23, N):
    assert abs(caratheodory_dim(golden, 0.1, N).alpha - GOLDEN_DIM) < 1e-6
    assert abs(caratheodory_dim(diag23, 0.1, N).alpha - 2) < 1e-6


def test_caratheodory_raw_crossing_tends_to_root(golden):
    raws = [caratheodory_dim(golden, 0.1, N).raw_alpha for N in (4, 8, 16)]
    assert raws[0] > raws[1] > raws[2] > GOLDEN_DIM


def test_caratheodory_radius_checks(golden):
    r_max = admissible_radius(golden)
    with pytest.raises(PreconditionError):
        caratheodory_dim(golden, r_max, 8)
    with pytest.raises(PreconditionError):
        caratheodory_dim(Repeller.full(PerturbedDoubling(0.05)), 0.01, 8)
    with pytest.raises(InputError):
        caratheodory_dim(golden, 0.1, 2)


def test_caratheodory_empty_set_degenerate(golden):
    empty = Sft.from_matrix(np.zeros((2, 2)))
    est = caratheodory_dim(golden, 0.1, 8, Z=empty)
    assert est.degenerate and est.alpha == 0


def test_cantor_gap_radius():
    assert abs(admissible_radius(Repeller.full(CANTOR)) - 1 / 3) < 1e-12


def test_box_dimension_examples(diag23, golden):
    assert abs(box_dimension(diag23, 8).dimension - 2) < 0.05
    assert abs(box_dimension(Repeller.full(CANTOR), 12).dimension - math.log(2) / math.log(3)) < 0.02
    assert abs(box_dimension(golden, 12).dimension - GOLDEN_DIM) < 0.02


def test_box_dimension_needs_three_scales(golden):
    with pytest.raises(InputError):
        box_dimension(golden, 3)


def test_mcmullen_examples():
    every = [(c, r) for c in range(2) for r in range(3)]
    assert abs(mcmullen_dim(3, 2, every) - 2) < 1e-12
    assert mcmullen_dim(3, 2, [(1, 1)]) == 0
    assert abs(mcmullen_dim(3, 2, [(0, 0), (1, 2)]) - 1) < 1e-12
    with pytest.raises(InputError):
        mcmullen_dim(2, 3, [(0, 0)])
    with pytest.raises(InputError):
        mcmullen_dim(3, 2, [])


def test_carpet_box_matches_mcmullen_uniform_fibres():
    digits = [(0, 0), (0, 2), (1, 1), (1, 2)]
    rep = Repeller.full(carpet_model(3, 2, digits))
    assert abs(box_dimension(rep, 10).dimension - mcmullen_dim(3, 2, digits)) < 0.05

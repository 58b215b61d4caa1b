import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bowenlab.cocycle import Repeller, philox
from bowenlab.errors import ConsistencyError, EmptySubshiftError, InputError
from bowenlab.models import LinearToral, PerturbedDoubling, diagonal_torus, doubling
from bowenlab.pressure import (
    Family,
    build_separated_set,
    equilibrium_state,
    limit_pressure,
    pressure_eps_schedule,
    pressure_limit,
    pressure_separated,
    pressure_spectral,
    variational_gap,
)
from bowenlab.symbolic import parry_measure, random_markov_measure

from conftest import LOG_PHI

LOG2, LOG3, LOG6 = math.log(2), math.log(3), math.log(6)


@pytest.mark.parametrize("s", [1.0, 1.25, 1.5, 2.0])
def test_diag23_closed_form(diag23, s):
    sub = pressure_spectral(diag23, "sub", s).value
    sup = pressure_spectral(diag23, "super", s).value
    assert abs(sub - (LOG6 - LOG2 - (s - 1) * LOG3)) < 1e-12
    assert abs(sup - (LOG6 - LOG3 - (s - 1) * LOG2)) < 1e-12


@pytest.mark.parametrize("s", [0.0, 0.3, 1.0])
def test_golden_closed_form(golden, s):
    assert abs(pressure_spectral(golden, "sub", s).value - (LOG_PHI - s * LOG2)) < 1e-12


def test_zero_potential_gives_entropy(golden):
    for m in (1, 3):
        assert abs(pressure_spectral(golden, "super", 0.0, m).value - LOG_PHI) < 1e-12


def test_linear_models_flat_in_depth(diag23, golden):
    for rep in (diag23, golden):
        est = pressure_limit(rep, "sub", 0.7, m_max=4)
        assert max(est.sequence) - min(est.sequence) < 1e-9


def test_shear_depth_sequences_are_monotone():
    rep = Repeller.full(LinearToral(np.array([[2, 1], [0, 3]])))
    sub = pressure_limit(rep, "sub", 1.0, m_max=5).sequence
    sup = pressure_limit(rep, "super", 1.0, m_max=5).sequence
    assert np.all(np.diff(sub) <= 1e-12) and np.all(np.diff(sup) >= -1e-12)
    lim = limit_pressure(rep, "sub", 1.0)
    assert sub[-1] >= lim - 1e-12 and sup[-1] <= limit_pressure(rep, "super", 1.0) + 1e-12


def test_perturbed_depth_sequence():
    rep = Repeller.full(PerturbedDoubling(0.05))
    vals = [pressure_spectral(rep, "sub", 1.0, m).value for m in range(2, 11)]
    assert np.all(np.diff(vals) <= 1e-12)
    lo, hi = pressure_spectral(rep, "sub", 1.0, 10).bracket
    assert hi - lo < 0.02 and lo <= 0 <= hi


def test_monotonicity_violation_is_reported(monkeypatch, golden):
    import bowenlab.pressure as pr

    real = pr.pressure_spectral

    def broken(rep, family, s, m=1):
        est = real(rep, family, s, m)
        return pr.PressureEstimate(est.value + 0.01 * m, est.method, m, est.family, s)

    monkeypatch.setattr(pr, "pressure_spectral", broken)
    with pytest.raises(ConsistencyError):
        pr.pressure_limit(golden, "sub", 0.5)


def test_bad_arguments(golden):
    with pytest.raises(InputError):
        pressure_spectral(golden, "sub", 1.5)
    with pytest.raises(InputError):
        pressure_spectral(golden, "sub", 0.5, 0)
    with pytest.raises(InputError):
        Family.parse("middle")
    with pytest.raises(InputError):
        build_separated_set(golden, 4, 0.0)


def test_separated_set_doubling_small():
    sep = build_separated_set(Repeller.full(doubling()), 3, 0.3)
    assert len(sep) >= 4
    assert sep.min_distance(Repeller.full(doubling())) >= 0.3


def test_separated_set_coarse_is_singleton():
    assert len(build_separated_set(Repeller.full(diagonal_torus(2, 3)), 1, 0.8)) == 1


def test_separated_constant_potential_exact(dbl):
    n = 8
    est = pressure_separated(dbl, "sub", 0.5, n, 1e-3)
    assert abs(est.value - (LOG2 - 0.5 * LOG2)) < 1e-12


def test_separated_diag23_matches_spectral(diag23):
    assert abs(pressure_separated(diag23, "sub", 2.0, 6, 0.05).value) < 0.1


@pytest.mark.parametrize("s", [0.5, 1.0])
def test_separated_golden_matches_spectral(golden, s):
    est = pressure_separated(golden, "sub", s, 14, 0.01).value
    assert abs(est - (LOG_PHI - s * LOG2)) < 0.05


def test_eps_schedule_lists_each_eps(golden):
    vals = pressure_eps_schedule(golden, "sub", 0.5, 8, schedule=(0.1, 0.02))
    assert [v.eps for v in vals] == [0.1, 0.02]


def test_variational_gap_at_equilibrium(golden, diag23):
    assert abs(variational_gap(golden, "sub", 0.0, parry_measure(golden.sft))) < 1e-10
    mu = equilibrium_state(diag23, "sub", 2.0)
    assert abs(variational_gap(diag23, "sub", 2.0, mu)) < 1e-10


@given(st.integers(0, 10**6), st.floats(0.0, 2.0), st.sampled_from(["sub", "super"]))
@settings(max_examples=30, deadline=None)
def test_variational_gap_nonnegative(seed, s, family):
    rep = Repeller.full(diagonal_torus(2, 3))
    mu = random_markov_measure(rep.sft, philox(seed))
    assert variational_gap(rep, family, s, mu) >= -1e-10


def test_empty_subshift_rejected():
    from bowenlab.symbolic import Sft

    rep = Repeller(doubling(), Sft.from_matrix(np.zeros((2, 2))))
    with pytest.raises(EmptySubshiftError):
        pressure_spectral(rep, "sub", 0.5)

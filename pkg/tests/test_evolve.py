import math

import numpy as np
import pytest

from nonlocal_kpp.core import BC, Params, Profile
from nonlocal_kpp.errors import DomainError, TimeStepStallError
from nonlocal_kpp.evolve import (
    BumpIC,
    EvolutionState,
    EvolveOptions,
    adapt_dt,
    bump_profile,
    decay_rate,
    dt_cap,
    random_profile,
    rhs,
    run_ivp,
    step_midpoint,
)
from nonlocal_kpp.oracles import DirichletSeries, NeumannSeries
from nonlocal_kpp.steady import SteadyProblem, closed_form_dirichlet


def test_adapt_dt_clamps():
    assert adapt_dt(1e-4, 0.01, 1.0) == pytest.approx(0.009)
    assert adapt_dt(0.0, 0.01, 1.0) == pytest.approx(0.02)
    assert adapt_dt(1.0, 0.01, 1.0) == pytest.approx(0.005)
    assert adapt_dt(1e-8, 0.01, 0.015) == pytest.approx(0.015)
    with pytest.raises(TimeStepStallError):
        adapt_dt(1.0, 1e-15, 1.0)


def test_step_refuses_unstable_dt():
    p = SteadyProblem.build(Params(1.0, 0.1), 50)
    state = EvolutionState(0.0, Profile(np.zeros(51), p.grid), 2 * dt_cap(p))
    with pytest.raises(ValueError):
        step_midpoint(state, p)


def test_steady_state_is_fixed_point():
    p = SteadyProblem.build(Params(0.45, 0.01), 100)
    from nonlocal_kpp.steady import newton_solve

    u = newton_solve(p, closed_form_dirichlet(p.params, p.grid))
    assert np.max(np.abs(rhs(p, u))) < 1e-9


@pytest.mark.parametrize("bc", [BC.DIRICHLET, BC.NEUMANN])
def test_matches_series(bc):
    a, D, N = 0.4, 0.02, 100
    p = SteadyProblem.build(Params(a, D, bc), N)
    th = math.pi * p.grid.nodes / a
    if bc is BC.DIRICHLET:
        u0 = Profile(np.sin(th) + 0.3 * np.sin(2 * th) ** 2, p.grid)
        ser = DirichletSeries(a, D, u0)
    else:
        u0 = Profile(1 + 0.5 * np.cos(th), p.grid)
        ser = NeumannSeries(a, D, u0)
    tr = run_ivp(p, u0, 1.0, [0.5, 1.0])
    for t, s in zip(tr.times, tr.snapshots):
        assert np.max(np.abs(s.values - ser(p.grid.nodes, t))) < 5e-4


def test_positivity_and_growth_bound():
    p = SteadyProblem.build(Params(3.0, 0.01), 150)
    u0 = random_profile(p.grid, seed=11)
    sup0 = float(np.max(u0.values))
    seen = []
    tr = run_ivp(p, u0, 3.0, (), monitor=lambda t, u: seen.append((t, float(u.min()), float(u.max()))))
    for t, lo, hi in seen:
        assert lo >= -1e-12
        assert hi <= sup0 * math.exp(t) * (1 + 1e-9)
    assert tr.n_steps == len(seen)


def test_neumann_random_ic_goes_to_constant():
    a = 0.4
    p = SteadyProblem.build(Params(a, 0.01, BC.NEUMANN), 40)
    tr = run_ivp(p, random_profile(p.grid, seed=2, bc=BC.NEUMANN), 60.0)
    assert tr.steady
    np.testing.assert_allclose(tr.final.values, 1 / a, atol=1e-6)


def test_random_profile_reproducible():
    p = SteadyProblem.build(Params(2.0, 0.01), 64)
    a = random_profile(p.grid, seed=4)
    b = random_profile(p.grid, seed=4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, random_profile(p.grid, seed=5).values)
    assert a.values.min() >= 0


def test_bump_support_checked():
    p = SteadyProblem.build(Params(1.0, 0.01), 100)
    with pytest.raises(DomainError):
        bump_profile(p.grid, BumpIC(0.02))
    u = bump_profile(p.grid, BumpIC(0.5))
    assert u.values.max() == pytest.approx(0.01)


def test_negative_initial_data_rejected():
    p = SteadyProblem.build(Params(1.0, 0.01), 40)
    with pytest.raises(DomainError):
        run_ivp(p, -np.ones(41), 1.0)


def test_decay_rate_fit():
    t = np.linspace(0, 10, 101)
    assert decay_rate(t, 3 * np.exp(-0.7 * t), 2, 8) == pytest.approx(0.7)


def test_options_validated():
    with pytest.raises(ValueError):
        EvolveOptions(max_change=1e-3, reject_change=1e-4)

import math

import numpy as np
import pytest

from nonlocal_kpp.core import BC, Params, build_grid
from nonlocal_kpp.errors import ConvergenceError, DomainError
from nonlocal_kpp.steady import (
    NewtonOptions,
    SteadyProblem,
    closed_form_dirichlet,
    count_peaks,
    jacobian,
    l1_norm,
    newton_solve,
    residual,
    residual_da,
)


def test_closed_form_domain_checks():
    g = build_grid(0.6, 50)
    with pytest.raises(DomainError):
        closed_form_dirichlet(Params(0.6, 0.01), g)
    with pytest.raises(DomainError):
        closed_form_dirichlet(Params(0.3, 0.01), build_grid(0.3, 50))


def test_newton_recovers_closed_form():
    p = SteadyProblem.build(Params(0.45, 0.01), 400)
    exact = closed_form_dirichlet(p.params, p.grid)
    u = newton_solve(p, np.sin(math.pi * p.grid.nodes / 0.45))
    assert np.max(np.abs(u.values - exact.values)) / np.max(exact.values) < 2e-5
    assert l1_norm(p.grid, u) == pytest.approx(1 - math.pi**2 * 0.01 / 0.45**2, abs=1e-5)


def test_neumann_constant_state():
    p = SteadyProblem.build(Params(0.4, 0.05, BC.NEUMANN), 200)
    u = newton_solve(p, np.full(201, 2.0))
    np.testing.assert_allclose(u.values, 2.5, atol=1e-10)


@pytest.mark.parametrize("bc", [BC.DIRICHLET, BC.NEUMANN])
@pytest.mark.parametrize("a", [0.4, 2.7])
def test_jacobian_matches_differences(bc, a):
    rng = np.random.default_rng(3)
    p = SteadyProblem.build(Params(a, 0.01, bc), 120)
    u = rng.uniform(0.1, 2.0, 121)
    v = rng.standard_normal(121)
    eps = 1e-6
    fd = (residual(p, u + eps * v) - residual(p, u - eps * v)) / (2 * eps)
    jv = jacobian(p, u) @ v
    assert np.max(np.abs(fd - jv)) <= 1e-5 * np.max(np.abs(jv))


@pytest.mark.parametrize("bc", [BC.DIRICHLET, BC.NEUMANN])
@pytest.mark.parametrize("a", [0.35, 1.9])
def test_residual_da_matches_differences(bc, a):
    rng = np.random.default_rng(5)
    N = 90
    u = rng.uniform(0.1, 2.0, N + 1)
    eps = 1e-6
    rp = residual(SteadyProblem.build(Params(a + eps, 0.02, bc), N), u)
    rm = residual(SteadyProblem.build(Params(a - eps, 0.02, bc), N), u)
    exact = residual_da(SteadyProblem.build(Params(a, 0.02, bc), N), u)
    np.testing.assert_allclose((rp - rm) / (2 * eps), exact, atol=1e-6 * np.max(np.abs(exact)))


def test_newton_reports_failure():
    p = SteadyProblem.build(Params(3.0, 0.002), 200)
    with pytest.raises(ConvergenceError) as info:
        newton_solve(p, np.ones(201), NewtonOptions(max_iter=1))
    assert info.value.iterate is not None
    assert info.value.residual_norm > 0


def test_count_peaks():
    x = np.linspace(0, 1, 201)
    u = np.sin(3 * math.pi * x) ** 2
    assert count_peaks(u) == 3
    assert count_peaks(np.cos(2 * math.pi * x) + 1.5, bc="neumann") == 2
    assert count_peaks(np.cos(2 * math.pi * x) + 1.5) == 0
    assert count_peaks(np.zeros(10)) == 0
    plateau = np.array([0, 1, 1, 1, 0, 0.0])
    assert count_peaks(plateau) == 1

import math

import numpy as np
import pytest

from nonlocal_kpp.core import BC, Params
from nonlocal_kpp.stability import Classification, analyse, classify, largest_eigenvalue, weighted_symmetry_defect, interior_weights, stability_matrix
from nonlocal_kpp.steady import SteadyProblem, closed_form_dirichlet


@pytest.mark.parametrize("mode", ["dense", "iterative"])
def test_trivial_state_spectrum(mode):
    a, D, N = 1.0, 0.05, 300
    p = SteadyProblem.build(Params(a, D), N)
    res = analyse(p, np.zeros(N + 1), mode=mode, k=3)
    h = a / N
    exact = [1 - D * 4 / h**2 * math.sin(n * math.pi * h / (2 * a)) ** 2 for n in (1, 2, 3)]
    np.testing.assert_allclose(res.spectrum_head[:3], exact, atol=1e-9)
    assert res.max_imag < 1e-10


def test_dense_and_iterative_agree_on_nontrivial_state():
    p = SteadyProblem.build(Params(0.45, 0.01), 400)
    u = closed_form_dirichlet(p.params, p.grid)
    d = analyse(p, u, mode="dense", k=3)
    it = analyse(p, u, mode="iterative", k=3)
    assert d.sigma_max == pytest.approx(it.sigma_max, abs=1e-9)
    assert d.classification is Classification.STABLE


def test_neumann_constant_state_spectrum():
    a, D, N = 0.4, 0.05, 200
    p = SteadyProblem.build(Params(a, D, BC.NEUMANN), N)
    res = analyse(p, np.full(N + 1, 1 / a), mode="dense", k=3)
    assert res.sigma_max == pytest.approx(-1.0, abs=1e-9)
    # the cosine modes follow: -n^2 pi^2 D / a^2 to O(dx^2)
    assert res.spectrum_head[1] == pytest.approx(-(math.pi**2) * D / a**2, rel=1e-3)


def test_neumann_operator_weighted_symmetric_on_constant_state():
    p = SteadyProblem.build(Params(0.4, 0.05, BC.NEUMANN), 60)
    M = stability_matrix(p, np.zeros(61))
    assert weighted_symmetry_defect(M, interior_weights(p.grid, p.bc)) < 1e-12


def test_classify():
    assert classify(-1e-3) is Classification.STABLE
    assert classify(1e-3) is Classification.UNSTABLE
    assert classify(1e-9) is Classification.MARGINAL


def test_largest_eigenvalue_rejects_unknown_mode():
    with pytest.raises(ValueError):
        largest_eigenvalue(np.eye(4), mode="power")

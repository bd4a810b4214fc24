import math

import numpy as np
import pytest

from nonlocal_kpp.core import BC, Profile, build_grid
from nonlocal_kpp.errors import DomainError
from nonlocal_kpp.oracles import (
    DirichletSeries,
    NeumannSeries,
    ValidationRecord,
    decay_envelope,
    delta_constants,
    large_D_core_constant,
    large_D_midpoint,
    local_fisher_limit_profile,
    small_D_branch_norm,
    small_D_profile,
    small_D_wavelength,
)
from nonlocal_kpp.steady import l1_norm


def test_delta_constants():
    l, dm, d1 = delta_constants()
    assert 6 * math.tanh(l / 2) == pytest.approx(l, abs=1e-12)
    assert l == pytest.approx(5.9694, abs=1e-3)
    assert dm == pytest.approx(0.0928, abs=1e-3)
    assert d1 == pytest.approx(0.00297)


def test_dirichlet_series_steady_limit():
    # below threshold the series settles on the single-arch state
    a, D = 0.4, 0.005
    g = build_grid(a, 200)
    u0 = Profile(0.3 * np.sin(math.pi * g.nodes / a), g)
    ser = DirichletSeries(a, D, u0)
    target = math.pi / (2 * a) * (1 - math.pi**2 * D / a**2) * np.sin(math.pi * g.nodes / a)
    np.testing.assert_allclose(ser(g.nodes, 60.0), target, atol=1e-8)
    np.testing.assert_allclose(ser(g.nodes, 0.0), u0.values, atol=1e-12)


def test_neumann_series_limit_and_start():
    a, D = 0.4, 0.02
    g = build_grid(a, 200)
    u0 = Profile(1 + 0.5 * np.cos(math.pi * g.nodes / a), g)
    ser = NeumannSeries(a, D, u0)
    np.testing.assert_allclose(ser(g.nodes, 0.0), u0.values, atol=1e-10)
    np.testing.assert_allclose(ser(g.nodes, 80.0), 1 / a, atol=1e-10)


def test_decay_envelope_regimes():
    a = 0.4
    crit = a * a / math.pi**2
    assert decay_envelope(a, crit, 200.0) == pytest.approx(math.pi / (2 * a * 200))
    assert decay_envelope(a, 2 * crit, 1.0, amplitude=2.0) == pytest.approx(2 * math.exp(-1))


def test_large_D_forms():
    assert large_D_core_constant(3.0) == pytest.approx(3 / 2.75)
    # huge D makes the tail finite, not an overflow
    assert math.isfinite(large_D_midpoint(3.0, 1e-6))
    with pytest.raises(DomainError):
        large_D_midpoint(0.4, 1.0)


def test_local_fisher_profile():
    assert local_fisher_limit_profile(3.0, 1.0) == (0.0, False)
    v = local_fisher_limit_profile(40.0, 20.0)
    assert v.exists and v.value == pytest.approx(1.0, abs=1e-6)
    assert local_fisher_limit_profile(40.0, 0.0).value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("bc, r, a", [(BC.DIRICHLET, 3, 2.0), (BC.DIRICHLET, 1, 0.3), (BC.NEUMANN, 4, 2.75)])
def test_small_D_profile_mass(bc, r, a):
    D = 1e-5
    prof = small_D_profile(a, D, r, bc, 4000)
    assert l1_norm(prof.grid, prof) == pytest.approx(small_D_branch_norm(a, D, r, bc), rel=2e-3)


def test_small_D_window_checked():
    with pytest.raises(DomainError):
        small_D_profile(3.0, 1e-5, 3)
    assert small_D_wavelength(2.0, 3) == pytest.approx(2.5 / 3)


def test_validation_record():
    rec = ValidationRecord("x", 1.01, 1.0, 0.02, relative=True)
    assert rec.passed and rec.rel_err == pytest.approx(0.01)
    assert not ValidationRecord("y", 1.1, 1.0, 0.05).passed
    assert set(rec.to_dict()) >= {"quantity", "numeric", "oracle", "tolerance", "pass"}

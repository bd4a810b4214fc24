import math

import numpy as np
import pytest
from scipy import integrate

from nonlocal_kpp.core import (
    BC,
    Params,
    Profile,
    apply_convolution,
    bands_to_dense,
    bands_to_lapack,
    build_convolution,
    build_grid,
    second_derivative,
    window_limits,
)
from nonlocal_kpp.errors import DimensionError, InvalidResolutionError, ParameterError


def test_params_validation():
    with pytest.raises(ParameterError):
        Params(0.0, 1.0)
    with pytest.raises(ParameterError):
        Params(1.0, -1.0)
    with pytest.raises(ParameterError):
        Params(1.0, 1.0, "robin")
    assert Params(1, 1, "NEUMANN").bc is BC.NEUMANN


def test_grid_resolution_checked():
    with pytest.raises(InvalidResolutionError):
        build_grid(1.0, 4)
    with pytest.raises(InvalidResolutionError):
        build_grid(1.0, 10.5)
    g = build_grid(2.0, 10)
    assert g.dx == pytest.approx(0.2)
    assert g.trapezium_weights().sum() == pytest.approx(2.0)


def test_profile_shape_checked():
    g = build_grid(1.0, 10)
    with pytest.raises(DimensionError):
        Profile(np.zeros(5), g)


def test_window_limits_small_domain_covers_everything():
    lo, hi, m = window_limits(0.4, 20)
    assert math.isinf(m)
    assert np.all(lo == 0) and np.all(hi == 20)


def test_window_limits_clipped():
    a, N = 3.0, 30
    lo, hi, m = window_limits(a, N)
    x = np.linspace(0, a, N + 1)
    np.testing.assert_allclose(lo * a / N, np.maximum(x - 0.5, 0), atol=1e-14)
    np.testing.assert_allclose(hi * a / N, np.minimum(x + 0.5, a), atol=1e-14)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.73, 1.0, 2.6, 9.99])
def test_convolution_exact_for_linear(a):
    N = 97
    g = build_grid(a, N)
    op = build_convolution(g)
    u = 2.0 - 0.7 * g.nodes
    exact = (2.0 * (op.beta - op.alpha)) - 0.35 * (op.beta**2 - op.alpha**2)
    np.testing.assert_allclose(apply_convolution(op, u), exact, atol=1e-13)


@pytest.mark.parametrize("a", [0.45, 1.37, 4.2])
def test_banded_weights_match_fast_apply(a):
    g = build_grid(a, 64)
    op = build_convolution(g)
    u = np.cos(3 * g.nodes) + g.nodes**2
    np.testing.assert_allclose(op.dense() @ u, apply_convolution(op, u), atol=1e-13)
    np.testing.assert_allclose(bands_to_dense(op.bands, op.halfwidth), op.dense(), atol=0)


def test_convolution_second_order():
    a = 2.3
    f = lambda x: np.sin(2.1 * x) + 1.5

    def err(N):
        g = build_grid(a, N)
        op = build_convolution(g)
        exact = np.array([integrate.quad(f, lo, hi, epsabs=1e-14)[0] for lo, hi in zip(op.alpha, op.beta)])
        return np.max(np.abs(apply_convolution(op, f(g.nodes)) - exact))

    ratio = err(80) / err(160)
    assert 3.5 <= ratio <= 4.5


def test_lapack_band_layout():
    g = build_grid(1.3, 20)
    op = build_convolution(g)
    b = op.halfwidth
    ab = bands_to_lapack(op.bands, b)
    M = op.dense()
    for i in range(M.shape[0]):
        for j in range(max(0, i - b), min(M.shape[0], i + b + 1)):
            assert ab[b + i - j, j] == M[i, j]


def test_second_derivative_orders():
    for bc, f, d2 in (
        (BC.DIRICHLET, lambda x: np.sin(x), lambda x: -np.sin(x)),
        (BC.NEUMANN, lambda x: np.cos(x), lambda x: -np.cos(x)),
    ):
        errs = []
        for N in (40, 80):
            g = build_grid(math.pi, N)
            errs.append(np.max(np.abs(second_derivative(g, f(g.nodes), bc) - d2(g.nodes))))
        assert 3.5 <= errs[0] / errs[1] <= 4.5

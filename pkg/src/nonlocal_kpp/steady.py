"""Steady states: residual, analytic Jacobian, damped Newton and diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BC,
    DEFAULT_N,
    ConvolutionOperator,
    Grid,
    Params,
    Profile,
    apply_convolution,
    as_values,
    bands_to_csr,
    build_convolution,
    build_grid,
    interpolate_index,
)
from .errors import ConvergenceError, DomainError, SingularJacobianError
from .linalg import BandedLU

__all__ = [
    "SteadyProblem",
    "NewtonOptions",
    "residual",
    "jacobian",
    "jacobian_bands",
    "residual_da",
    "residual_floor",
    "newton_solve",
    "closed_form_dirichlet",
    "l1_norm",
    "count_peaks",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SteadyProblem:
    params: Params
    grid: Grid
    conv: ConvolutionOperator

    @classmethod
    def build(cls, params: Params, N: int = DEFAULT_N) -> "SteadyProblem":
        grid = build_grid(params, N)
        return cls(params, grid, build_convolution(grid, params))

    def at(self, a: float) -> "SteadyProblem":
        """Same D, bc and N on a domain of length ``a``."""
        if a == self.params.a:
            return self
        return SteadyProblem.build(self.params.with_a(a), self.grid.N)

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def bc(self) -> BC:
        return self.params.bc

    def profile(self, values) -> Profile:
        return Profile(np.asarray(values, dtype=float), self.grid)


@dataclass(frozen=True)
class NewtonOptions:
    tol_residual: float = 1e-10
    max_iter: int = 50
    damping: float = 1.0
    max_halvings: int = 6

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


def residual(p: SteadyProblem, u) -> np.ndarray:
    """Discrete steady equations: interior D u'' + u (1 - conv u), boundary rows from the BCs."""
    v = as_values(u, p.grid)
    h = p.grid.dx
    conv = apply_convolution(p.conv, v)
    r = np.empty_like(v)
    r[1:-1] = p.params.D * (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h**2 + v[1:-1] * (1.0 - conv[1:-1])
    _boundary_rows(r, v, h, p.bc)
    return r


def _boundary_rows(r, v, h, bc):
    if bc is BC.DIRICHLET:
        r[0] = v[0]
        r[-1] = v[-1]
    else:
        r[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
        r[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)


def jacobian_bands(p: SteadyProblem, u) -> tuple[np.ndarray, int]:
    """Row-banded Jacobian D L + diag(1 - K u) - diag(u) K with boundary rows."""
    v = as_values(u, p.grid)
    h = p.grid.dx
    b = p.conv.halfwidth
    conv = apply_convolution(p.conv, v)
    J = -v[:, None] * p.conv.bands
    c = p.params.D / h**2
    J[:, b] += 1.0 - conv - 2.0 * c
    J[:, b - 1] += c
    J[:, b + 1] += c
    J[0, :] = 0.0
    J[-1, :] = 0.0
    if p.bc is BC.DIRICHLET:
        J[0, b] = 1.0
        J[-1, b] = 1.0
    else:
        J[0, b : b + 3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
        J[-1, b - 2 : b + 1] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    return J, b


def jacobian(p: SteadyProblem, u):
    """Jacobian of :func:`residual` as a sparse CSR matrix."""
    J, b = jacobian_bands(p, u)
    return bands_to_csr(J, b)


def residual_da(p: SteadyProblem, u) -> np.ndarray:
    """Derivative of the residual with respect to a at fixed nodal values.

    The mesh scales with a (dx = a / N), so the nodal values are held fixed
    while the window limits move in index space.
    """
    v = as_values(u, p.grid)
    a, N = p.grid.a, p.grid.N
    h = p.grid.dx
    conv = apply_convolution(p.conv, v)
    dconv = conv / a
    if a > 0.5:
        hi, lo = p.conv.hi, p.conv.lo
        edge = np.where(hi < N, interpolate_index(v, hi), 0.0)
        edge += np.where(lo > 0, interpolate_index(v, lo), 0.0)
        dconv = dconv - edge / (2.0 * a)
    r = np.empty_like(v)
    r[1:-1] = -2.0 * p.params.D * (v[:-2] - 2.0 * v[1:-1] + v[2:]) / (h**2 * a) - v[1:-1] * dconv[1:-1]
    if p.bc is BC.DIRICHLET:
        r[0] = r[-1] = 0.0
    else:
        _boundary_rows(r, v, h, p.bc)
        r[0] /= -a
        r[-1] /= -a
    return r


def residual_floor(p: SteadyProblem, u) -> float:
    """Rounding level of the residual: a few ulps of the largest term D u''."""
    v = as_values(u)
    scale = 4.0 * p.params.D / p.grid.dx**2 + 2.0
    return 4.0 * np.finfo(float).eps * scale * float(np.max(np.abs(v)))


def newton_solve(p: SteadyProblem, guess, opts: NewtonOptions | None = None) -> Profile:
    """Damped Newton iteration for the steady equations at fixed a.

    Steps are halved (at most ``opts.max_halvings`` times) while the residual
    infinity norm increases.  Convergence means |R|_inf <= tol_residual, or
    below :func:`residual_floor` when that is larger (very large D / dx^2).
    Raises :class:`ConvergenceError` after ``max_iter`` iterations and
    :class:`SingularJacobianError` if a linear solve breaks down.
    """
    opts = opts or NewtonOptions()
    u = np.array(as_values(guess, p.grid), dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("Newton guess must be finite")
    r = residual(p, u)
    rn = np.max(np.abs(r))
    for it in range(opts.max_iter + 1):
        if rn <= max(opts.tol_residual, residual_floor(p, u)):
            log.debug("newton converged in %d iterations (|R| = %.3e)", it, rn)
            return p.profile(u)
        if it == opts.max_iter:
            break
        J, b = jacobian_bands(p, u)
        try:
            du = BandedLU(J, b).solve(-r)
        except SingularJacobianError as exc:
            raise SingularJacobianError(str(exc), iterate=u, residual_norm=rn, iterations=it) from exc
        lam = opts.damping
        for _ in range(opts.max_halvings + 1):
            trial = u + lam * du
            r_trial = residual(p, trial)
            rn_trial = np.max(np.abs(r_trial))
            if np.isfinite(rn_trial) and rn_trial < rn:
                break
            lam *= 0.5
        if not np.isfinite(rn_trial):
            raise ConvergenceError("Newton iterate became non-finite", iterate=u, residual_norm=rn, iterations=it)
        u, r, rn = trial, r_trial, rn_trial
    raise ConvergenceError(
        f"Newton failed to converge in {opts.max_iter} iterations (|R| = {rn:.3e})",
        iterate=u,
        residual_norm=rn,
        iterations=opts.max_iter,
    )


def closed_form_dirichlet(params: Params, grid: Grid) -> Profile:
    """Exact nontrivial Dirichlet steady state for a <= 1/2 and D < a^2/pi^2.

    u_s(x) = pi/(2a) (1 - pi^2 D / a^2) sin(pi x / a).
    """
    a, D = params.a, params.D
    if a > 0.5:
        raise DomainError(f"closed form needs a <= 1/2, got a = {a}")
    if D >= a * a / math.pi**2:
        raise DomainError(f"closed form needs D < a^2/pi^2 = {a * a / math.pi**2:.6g}, got D = {D}")
    amp = math.pi / (2.0 * a) * (1.0 - math.pi**2 * D / a**2)
    values = amp * np.sin(math.pi * grid.nodes / a)
    values[0] = values[-1] = 0.0
    return Profile(values, grid)


def l1_norm(grid: Grid, u) -> float:
    """Trapezium-rule integral of u over [0, a]."""
    v = as_values(u, grid)
    return float(grid.dx * (v.sum() - 0.5 * (v[0] + v[-1])))


def count_peaks(u, rel_threshold: float = 0.1, bc: BC | str = BC.DIRICHLET) -> int:
    """Number of local maxima reaching ``rel_threshold * max(u)``.

    Runs of equal values are collapsed first so a plateau counts once.  With
    Neumann ends a boundary node that exceeds its neighbour counts as a peak.
    """
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    v = as_values(u)
    top = float(np.max(v))
    if top <= 0:
        return 0
    thr = rel_threshold * top
    w = v[np.r_[True, v[1:] != v[:-1]]]
    if w.size < 2:
        return 0
    inner = (w[1:-1] > w[:-2]) & (w[1:-1] > w[2:]) & (w[1:-1] >= thr)
    n = int(np.count_nonzero(inner))
    if BC.parse(bc) is BC.NEUMANN:
        n += int(w[0] > w[1] and w[0] >= thr)
        n += int(w[-1] > w[-2] and w[-1] >= thr)
    return n

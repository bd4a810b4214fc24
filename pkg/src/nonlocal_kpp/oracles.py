"""Closed-form and asymptotic reference values.

Everything here is independent of the finite-difference machinery: exact
Fourier-series solutions of the evolution problems for a <= 1/2, decay laws,
large-D and small-D asymptotic states, and a few derived constants.  The
numerical modules are checked against these.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .core import BC, DEFAULT_N, Grid, Profile, as_values, build_grid
from .errors import DomainError

__all__ = [
    "SeriesOptions",
    "DirichletSeries",
    "NeumannSeries",
    "dirichlet_series",
    "neumann_series",
    "large_D_midpoint",
    "large_D_core_constant",
    "small_D_wavelength",
    "small_D_profile",
    "small_D_branch_norm",
    "delta_constants",
    "decay_envelope",
    "local_fisher_limit_profile",
    "LocalFisherValue",
    "ValidationRecord",
    "DELTA_1",
]

# diffusivity below which multi-peak periodic states exist; quoted constant,
# not recomputed here
DELTA_1 = 0.00297
DELTA_1_SOURCE = "quoted constant for the periodic-state existence threshold (companion analysis)"

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SeriesOptions:
    n_modes: int = 200
    quad_tol: float = 1e-10
    term_tol: float = 1e-14

    def __post_init__(self):
        if self.n_modes < 8:
            raise ValueError("n_modes must be >= 8")


def _trapz(grid: Grid, f: np.ndarray) -> float:
    return float(grid.dx * (f.sum() - 0.5 * (f[0] + f[-1])))


class DirichletSeries:
    """Exact solution of the Dirichlet problem for 0 < a <= 1/2.

    With sine coefficients A_n of u0, the solution is

        u(x, t) = J(t) sum_n A_n exp(-n^2 pi^2 D t / a^2) sin(n pi x / a),
        J(t) = e^t / (1 + a M(t)),  M(t) = int_0^t e^s G(s) ds,
        G(t) = (2/pi) sum_{n odd} A_n / n exp(-n^2 pi^2 D t / a^2).

    ``J`` is evaluated as 1 / (e^{-t} + a e^{-t} M(t)) to avoid overflow.
    """

    def __init__(self, a: float, D: float, u0: Profile, opts: SeriesOptions | None = None):
        if a > 0.5:
            raise DomainError(f"series solution needs a <= 1/2, got {a}")
        self.a, self.D = float(a), float(D)
        self.opts = opts or SeriesOptions()
        grid = u0.grid
        x = grid.nodes
        # modes beyond the grid's resolution would only alias
        n = np.arange(1, min(self.opts.n_modes, grid.N - 1) + 1)
        self.n = n
        self.coef = np.array([2.0 / a * _trapz(grid, u0.values * np.sin(k * math.pi * x / a)) for k in n])
        self.rates = (n * math.pi / a) ** 2 * D
        odd = n % 2 == 1
        self._g_coef = np.where(odd, 2.0 / math.pi * self.coef / n, 0.0)

    def G(self, t: float) -> float:
        return float(np.sum(self._g_coef * np.exp(-self.rates * t)))

    def scaled_M(self, t: float) -> float:
        """e^{-t} M(t) = int_0^t e^{-(t - s)} G(s) ds."""
        if t <= 0:
            return 0.0
        tol = self.opts.quad_tol
        f = lambda s: math.exp(s - t) * self.G(s)  # noqa: E731
        lo = max(0.0, t - 40.0)
        val, _ = integrate.quad(f, lo, t, epsabs=tol, epsrel=tol, limit=200)
        return val

    def M(self, t: float) -> float:
        return math.exp(t) * self.scaled_M(t)

    def J(self, t: float) -> float:
        return 1.0 / (math.exp(-t) + self.a * self.scaled_M(t))

    def mean(self, t: float) -> float:
        return self.J(t) * self.G(t)

    def modes(self, t: float) -> np.ndarray:
        amp = self.coef * np.exp(-self.rates * t)
        keep = np.abs(amp) >= self.opts.term_tol
        if not keep.any():
            return amp[:0]
        last = int(np.nonzero(keep)[0][-1]) + 1
        return amp[:last]

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        amp = self.modes(t)
        k = np.arange(1, amp.size + 1)
        s = np.sin(np.outer(x, k) * math.pi / self.a) @ amp if amp.size else np.zeros_like(x)
        return self.J(t) * s


class NeumannSeries:
    """Exact solution of the Neumann problem for 0 < a <= 1/2.

        u(x, t) = N(t) (c_0/2 + sum_n c_n exp(-n^2 pi^2 D t / a^2) cos(n pi x / a)),
        N(t) = 1 / (a c_0/2 + (1 - a c_0/2) e^{-t}).
    """

    def __init__(self, a: float, D: float, u0: Profile, opts: SeriesOptions | None = None):
        if a > 0.5:
            raise DomainError(f"series solution needs a <= 1/2, got {a}")
        self.a, self.D = float(a), float(D)
        self.opts = opts or SeriesOptions()
        grid = u0.grid
        x = grid.nodes
        n = np.arange(0, min(self.opts.n_modes, grid.N - 1) + 1)
        self.coef = np.array([2.0 / a * _trapz(grid, u0.values * np.cos(k * math.pi * x / a)) for k in n])
        self.rates = (n * math.pi / a) ** 2 * D

    def N(self, t: float) -> float:
        k = 0.5 * self.a * self.coef[0]
        return 1.0 / (k + (1.0 - k) * math.exp(-t))

    def mean(self, t: float) -> float:
        return 0.5 * self.coef[0] * self.N(t)

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        amp = self.coef[1:] * np.exp(-self.rates[1:] * t)
        keep = np.abs(amp) >= self.opts.term_tol
        amp = amp[: int(np.nonzero(keep)[0][-1]) + 1] if keep.any() else amp[:0]
        k = np.arange(1, amp.size + 1)
        s = np.cos(np.outer(x, k) * math.pi / self.a) @ amp if amp.size else np.zeros_like(x)
        return self.N(t) * (0.5 * self.coef[0] + s)


def dirichlet_series(a: float, D: float, u0: Profile, t: float, opts: SeriesOptions | None = None) -> Profile:
    """Exact Dirichlet solution at time ``t`` sampled on the grid of ``u0``."""
    ser = DirichletSeries(a, D, u0, opts)
    return Profile(ser(u0.grid.nodes, t), u0.grid)


def neumann_series(a: float, u0: Profile, D: float, t: float, opts: SeriesOptions | None = None) -> Profile:
    """Exact Neumann solution at time ``t`` sampled on the grid of ``u0``."""
    ser = NeumannSeries(a, D, u0, opts)
    return Profile(ser(u0.grid.nodes, t), u0.grid)


# -- large D ----------------------------------------------------------------


def large_D_core_constant(a: float) -> float:
    """Leading-order interior level a / (a - 1/4) of the Neumann steady state."""
    if a <= 0.5:
        raise DomainError("core constant applies for a > 1/2")
    return a / (a - 0.25)


def large_D_midpoint(a: float, D: float) -> float:
    """Composite large-D approximation to the Neumann steady state at x = a/2."""
    if a <= 0.5:
        raise DomainError("composite form applies for a > 1/2")
    rd = math.sqrt(D)
    z = a / (2.0 * rd)
    # 1 / (8 sqrt(D) sinh z), written to stay finite for large z
    tail = math.exp(-z) / (4.0 * rd * (1.0 - math.exp(-2.0 * z)))
    return a / (a - 0.25) + tail - 1.0 / (4.0 * a)


# -- small D ----------------------------------------------------------------


def _window(a: float, r: int, bc: BC) -> tuple[float, float]:
    if bc is BC.DIRICHLET:
        return 0.5 * (r - 1), r - 0.5
    return 0.5 * (r - 1), r - 0.5 * (3.0 - SQRT2)


def small_D_wavelength(a: float, r: int, bc: BC | str = BC.DIRICHLET) -> float:
    """Wavelength of the r-peak small-D state on [0, a]."""
    bc = BC.parse(bc)
    if bc is BC.DIRICHLET:
        return (a + 0.5) / r
    return (a + 0.5 * (SQRT2 - 1.0)) / (r - 2 + SQRT2)


def _check_window(a: float, r: int, bc: BC) -> None:
    if int(r) != r or r < (1 if bc is BC.DIRICHLET else 2):
        raise DomainError(f"invalid peak count r = {r} for {bc.value} ends")
    lo, hi = _window(a, r, bc)
    if not lo < a < hi:
        raise DomainError(f"a = {a} outside the {r}-peak window ({lo:.6g}, {hi:.6g})")


def small_D_profile(a: float, D: float, r: int, bc: BC | str = BC.DIRICHLET, N: int | Grid = DEFAULT_N) -> Profile:
    """Leading-order r-peak steady state for small D.

    Dirichlet: r sine arches of width w = lambda - 1/2 separated by zero gaps
    of width 1/2.  Neumann: r - 2 interior cosine bumps of width w, plus a
    half-peak at each end whose height and width are sqrt(2) times larger.
    Each arch is scaled by its finite-D factor (1 - pi^2 D / w_eff^2) so the
    L1 norm reproduces the echelon curve and r = 1 reproduces the exact
    single-arch state.
    """
    bc = BC.parse(bc)
    _check_window(a, r, bc)
    grid = N if isinstance(N, Grid) else build_grid(a, N)
    x = grid.nodes
    lam = small_D_wavelength(a, r, bc)
    w = lam - 0.5
    u = np.zeros_like(x)
    if bc is BC.DIRICHLET:
        fac = 1.0 - math.pi**2 * D / w**2
        if fac <= 0:
            raise DomainError(f"D = {D} too large for arches of width {w:.4g}")
        amp = math.pi / (2.0 * w) * fac
        for k in range(r):
            s = x - k * lam
            inside = (s >= 0) & (s <= w)
            u[inside] = amp * np.sin(math.pi * s[inside] / w)
    else:
        wb = w / SQRT2
        fac_i = 1.0 - math.pi**2 * D / w**2
        fac_b = 1.0 - math.pi**2 * D / (2.0 * w**2)
        if fac_i <= 0:
            raise DomainError(f"D = {D} too large for bumps of width {w:.4g}")
        amp_i = math.pi / (2.0 * w) * fac_i
        amp_b = math.pi / (2.0 * wb) * fac_b
        left = x <= wb
        right = x >= a - wb
        u[left] = amp_b * np.cos(math.pi * x[left] / (2.0 * wb))
        u[right] = amp_b * np.cos(math.pi * (a - x[right]) / (2.0 * wb))
        for k in range(r - 2):
            s = x - (wb + k * lam + 0.5)
            inside = (s >= 0) & (s <= w)
            u[inside] = amp_i * np.sin(math.pi * s[inside] / w)
    u = np.maximum(u, 0.0)
    if bc is BC.DIRICHLET:
        u[0] = u[-1] = 0.0
    return Profile(u, grid)


def small_D_branch_norm(a: float, D: float, r: int, bc: BC | str = BC.DIRICHLET) -> float:
    """Small-D echelon curve r (1 - pi^2 D / (lambda - 1/2)^2)."""
    bc = BC.parse(bc)
    _check_window(a, r, bc)
    w = small_D_wavelength(a, r, bc) - 0.5
    return r * (1.0 - math.pi**2 * D / w**2)


# -- constants and decay laws -------------------------------------------------


def delta_constants() -> tuple[float, float, float]:
    """(l, Delta_m, Delta_1): l solves 6 tanh(l/2) = l, Delta_m = 2 sinh(l/2) / l^3."""
    l = optimize.bisect(lambda s: 6.0 * math.tanh(0.5 * s) - s, 4.0, 8.0, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    delta_m = 2.0 * math.sinh(0.5 * l) / l**3
    return l, delta_m, DELTA_1


def decay_envelope(a: float, D: float, t: float, amplitude: float = 1.0, rtol: float = 1e-12) -> float:
    """Predicted large-t sup-norm of the Dirichlet solution for a <= 1/2.

    Below the threshold D < a^2/pi^2 the solution settles on the single-arch
    steady state; above it decays like ``amplitude * exp(-(pi^2 D/a^2 - 1) t)``
    where ``amplitude`` is A_1 / (1 + a M_inf); at the threshold the decay is
    algebraic, pi / (2 a t).
    """
    crit = a * a / math.pi**2
    if math.isclose(D, crit, rel_tol=rtol):
        return math.pi / (2.0 * a * t)
    if D < crit:
        return math.pi / (2.0 * a) * (1.0 - D / crit)
    return amplitude * math.exp(-(D / crit - 1.0) * t)


class LocalFisherValue(NamedTuple):
    value: float
    exists: bool


def local_fisher_limit_profile(abar: float, xbar: float, regime: str = "auto") -> LocalFisherValue:
    """Large-D Dirichlet steady state in the rescaled variables (abar = a/sqrt D, xbar = x/sqrt D).

    ``regime='near'`` gives the transcritical form (3/4)(abar - pi) sin(pi xbar / abar);
    ``regime='far'`` the sech^2 boundary-layer composite valid for abar >> 1.
    ``auto`` switches to the composite once abar > 4.  No nontrivial state
    exists for abar <= pi; the value is then 0 with ``exists=False``.
    """
    if abar <= math.pi:
        return LocalFisherValue(0.0, False)
    if regime == "auto":
        regime = "near" if abar <= 4.0 else "far"
    if regime == "near":
        return LocalFisherValue(0.75 * (abar - math.pi) * math.sin(math.pi * xbar / abar), True)
    if regime != "far":
        raise ValueError(f"unknown regime {regime!r}")
    shift = math.log(2.0 + math.sqrt(3.0))
    left = 1.0 / math.cosh(0.5 * (xbar + shift)) ** 2
    right = 1.0 / math.cosh(0.5 * (abar - xbar + shift)) ** 2
    return LocalFisherValue(1.0 - 1.5 * left - 1.5 * right, True)


@dataclass
class ValidationRecord:
    quantity: str
    numeric: float
    oracle: float
    tolerance: float
    relative: bool = False

    @property
    def abs_err(self) -> float:
        return abs(self.numeric - self.oracle)

    @property
    def rel_err(self) -> float:
        return self.abs_err / abs(self.oracle) if self.oracle != 0 else math.inf

    @property
    def passed(self) -> bool:
        err = self.rel_err if self.relative else self.abs_err
        return bool(np.isfinite(err) and err <= self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("relative")
        d.update(abs_err=self.abs_err, rel_err=self.rel_err, tolerance=self.tolerance, **{"pass": self.passed})
        return d

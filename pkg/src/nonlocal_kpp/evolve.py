"""Time integration by the explicit midpoint method with adaptive steps.

    u_half = u + (dt/2) F(u),    u_new = u + dt F(u_half),

where F(u) = D u'' + u (1 - conv u).  The step is capped at dx^2 / (4 D) and
otherwise chosen so the largest nodal change per step stays near 1e-4.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import BC, Grid, Profile, apply_convolution, as_values
from .errors import BlowUpError, DomainError, TimeStepStallError
from .steady import SteadyProblem, count_peaks, residual

__all__ = [
    "EvolutionState",
    "EvolveOptions",
    "BumpIC",
    "Trajectory",
    "rhs",
    "step_midpoint",
    "adapt_dt",
    "dt_cap",
    "run_ivp",
    "bump_profile",
    "random_profile",
    "decay_rate",
]

log = logging.getLogger(__name__)

DT_FLOOR = 1e-14


@dataclass
class EvolutionState:
    t: float
    profile: Profile
    dt: float

    @property
    def values(self) -> np.ndarray:
        return self.profile.values


@dataclass(frozen=True)
class EvolveOptions:
    max_change: float = 1e-4
    reject_change: float = 2e-4
    steady_tol: float = 1e-8
    steady_hold: int = 100
    dt_init: float | None = None
    max_steps: int = 50_000_000
    stop_when_steady: bool = True

    def __post_init__(self):
        if not 0 < self.max_change < self.reject_change:
            raise ValueError("need 0 < max_change < reject_change")


@dataclass(frozen=True)
class BumpIC:
    x0: float
    w: float = 0.1
    amp: float = 0.01

    def __post_init__(self):
        if not (self.w > 0 and self.amp > 0):
            raise ValueError("bump width and amplitude must be positive")


def dt_cap(p: SteadyProblem) -> float:
    """Largest admissible step, dx^2 / (4 D)."""
    return 0.25 * p.grid.dx**2 / p.params.D


def rhs(p: SteadyProblem, u) -> np.ndarray:
    """F(u) with boundary entries that keep the boundary conditions satisfied.

    Dirichlet ends are held at zero.  Neumann end values follow the interior
    through the three-point zero-slope closure, F_0 = (4 F_1 - F_2) / 3.
    """
    v = as_values(u, p.grid)
    h = p.grid.dx
    conv = apply_convolution(p.conv, v)
    F = np.empty_like(v)
    F[1:-1] = p.params.D * (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h**2 + v[1:-1] * (1.0 - conv[1:-1])
    if p.bc is BC.DIRICHLET:
        F[0] = F[-1] = 0.0
    else:
        F[0] = (4.0 * F[1] - F[2]) / 3.0
        F[-1] = (4.0 * F[-2] - F[-3]) / 3.0
    return F


def _midpoint(p: SteadyProblem, u: np.ndarray, dt: float, F0: np.ndarray | None = None) -> np.ndarray:
    if F0 is None:
        F0 = rhs(p, u)
    return u + dt * rhs(p, u + 0.5 * dt * F0)


def step_midpoint(state: EvolutionState, p: SteadyProblem) -> EvolutionState:
    """One midpoint step of size ``state.dt``; raises :class:`BlowUpError` on non-finite values."""
    cap = dt_cap(p)
    if state.dt > cap * (1 + 1e-12):
        raise ValueError(f"dt = {state.dt:.3e} exceeds the stability cap {cap:.3e}")
    new = _midpoint(p, state.values, state.dt)
    if not np.all(np.isfinite(new)):
        raise BlowUpError(f"non-finite values at t = {state.t + state.dt:.6g}", last_state=state)
    return EvolutionState(state.t + state.dt, Profile(new, p.grid), state.dt)


def adapt_dt(prev_change: float, dt: float, cap: float, target: float = 1e-4) -> float:
    """Next step from the last realised max-norm change, clamped to [dt/2, 2 dt] and the cap."""
    if prev_change < 0:
        raise ValueError("prev_change must be >= 0")
    factor = min(max(0.9 * target / max(prev_change, 1e-16), 0.5), 2.0)
    new = min(cap, dt * factor)
    if new < DT_FLOOR:
        raise TimeStepStallError(f"time step collapsed to {new:.3e}")
    return new


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: list[Profile]
    final: Profile
    t_final: float
    steady: bool
    terminal_peaks: int
    terminal_residual: float
    n_steps: int
    n_rejected: int
    wall_time: float
    history_t: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    history_sup: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    history_mid: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    def summary(self) -> dict:
        return {
            "t_final": self.t_final,
            "steady": self.steady,
            "terminal_peaks": self.terminal_peaks,
            "terminal_residual": self.terminal_residual,
            "n_steps": self.n_steps,
            "n_rejected": self.n_rejected,
            "wall_time": self.wall_time,
        }


def run_ivp(
    p: SteadyProblem,
    u0,
    t_end: float,
    snapshot_times: Sequence[float] = (),
    opts: EvolveOptions | None = None,
    monitor: Callable[[float, np.ndarray], None] | None = None,
) -> Trajectory:
    """Integrate from ``u0`` to ``t_end`` (or until steady).

    Snapshots are linearly interpolated between accepted steps.  A steady
    state is declared once ||F(u)||_inf < ``steady_tol`` has held for
    ``steady_hold`` consecutive steps.  Neumann initial data are first made
    consistent with the zero-slope closure at the ends.
    """
    opts = opts or EvolveOptions()
    u = np.array(as_values(u0, p.grid), dtype=float)
    # round-off negatives (e.g. from a Newton solve) are zeroed, real ones rejected
    if np.any(u < -1e-12 * max(float(np.max(np.abs(u))), 1.0)):
        raise DomainError("initial data must be non-negative")
    if p.bc is BC.DIRICHLET:
        u[0] = u[-1] = 0.0
    else:
        u[0] = (4.0 * u[1] - u[2]) / 3.0
        u[-1] = (4.0 * u[-2] - u[-3]) / 3.0
    np.maximum(u, 0.0, out=u)
    snaps_t = np.sort(np.asarray(snapshot_times, dtype=float))
    snaps: list[Profile] = []
    k_snap = 0
    while k_snap < snaps_t.size and snaps_t[k_snap] <= 0.0:
        snaps.append(Profile(u.copy(), p.grid))
        k_snap += 1

    cap = dt_cap(p)
    dt = min(cap, opts.dt_init if opts.dt_init else cap)
    t = 0.0
    n_steps = n_rej = calm = 0
    steady = False
    hist_t, hist_sup, hist_mid = [0.0], [float(np.max(u))], [float(u[p.N // 2])]
    mid = p.N // 2
    F = rhs(p, u)
    t0 = time.perf_counter()
    while t < t_end and n_steps < opts.max_steps:
        h = min(dt, t_end - t)
        new = _midpoint(p, u, h, F)
        if not np.all(np.isfinite(new)):
            raise BlowUpError(f"non-finite values at t = {t + h:.6g}", last_state=EvolutionState(t, Profile(u, p.grid), h))
        change = float(np.max(np.abs(new - u)))
        if change > opts.reject_change:
            n_rej += 1
            dt = 0.5 * h
            if dt < DT_FLOOR:
                raise TimeStepStallError(f"time step collapsed at t = {t:.6g}", last_state=EvolutionState(t, Profile(u, p.grid), dt))
            continue
        t_new = t + h
        while k_snap < snaps_t.size and snaps_t[k_snap] <= t_new:
            th = (snaps_t[k_snap] - t) / h
            snaps.append(Profile((1.0 - th) * u + th * new, p.grid))
            k_snap += 1
        u, t = new, t_new
        n_steps += 1
        hist_t.append(t)
        hist_sup.append(float(np.max(u)))
        hist_mid.append(float(u[mid]))
        if monitor is not None:
            monitor(t, u)
        F = rhs(p, u)
        fn = float(np.max(np.abs(F)))
        calm = calm + 1 if fn < opts.steady_tol else 0
        if calm >= opts.steady_hold:
            steady = True
            if opts.stop_when_steady:
                break
        # a final step shortened to land on t_end says nothing about the step size
        if h == dt:
            dt = adapt_dt(change, h, cap, opts.max_change)
    wall = time.perf_counter() - t0
    final = Profile(u, p.grid)
    return Trajectory(
        times=snaps_t[: len(snaps)],
        snapshots=snaps,
        final=final,
        t_final=t,
        steady=steady,
        terminal_peaks=count_peaks(u, 0.1, p.bc) if np.max(u) > 0 else 0,
        terminal_residual=float(np.max(np.abs(residual(p, u)))),
        n_steps=n_steps,
        n_rejected=n_rej,
        wall_time=wall,
        history_t=np.asarray(hist_t),
        history_sup=np.asarray(hist_sup),
        history_mid=np.asarray(hist_mid),
    )


def bump_profile(grid: Grid, ic: BumpIC) -> Profile:
    """amp (1 - 4 (x - x0)^2 / w^2) on |x - x0| < w/2, zero elsewhere."""
    lo, hi = ic.x0 - 0.5 * ic.w, ic.x0 + 0.5 * ic.w
    if lo < 0 or hi > grid.a:
        raise DomainError(f"bump support [{lo:.4g}, {hi:.4g}] leaves [0, {grid.a:.4g}]")
    x = grid.nodes
    u = np.where(np.abs(x - ic.x0) < 0.5 * ic.w, ic.amp * (1.0 - 4.0 * (x - ic.x0) ** 2 / ic.w**2), 0.0)
    return Profile(u, grid)


def random_profile(grid: Grid, seed: int, bc: BC | str = BC.DIRICHLET, modes: int = 6, scale: float = 1.0) -> Profile:
    """Smooth positive random initial data from an explicit seed.

    A low-order cosine sum with relative amplitude below 1/2 multiplies
    sin(pi x/a) (Dirichlet) or a constant (Neumann), so the result is
    positive in the interior and satisfies the boundary condition.
    """
    rng = np.random.default_rng(seed)
    x = grid.nodes
    c = rng.uniform(-1.0, 1.0, modes)
    c *= 0.5 / max(np.sum(np.abs(c)), 1e-300)
    wiggle = 1.0 + np.cos(np.outer(x, np.arange(1, modes + 1)) * math.pi / grid.a) @ c
    base = np.sin(math.pi * x / grid.a) if BC.parse(bc) is BC.DIRICHLET else np.ones_like(x)
    u = scale * rng.uniform(0.5, 2.0) * base * wiggle
    if BC.parse(bc) is BC.DIRICHLET:
        u[0] = u[-1] = 0.0
    return Profile(u, grid)


def decay_rate(t: np.ndarray, y: np.ndarray, t_lo: float, t_hi: float) -> float:
    """Least-squares slope of -log(y) over t in [t_lo, t_hi]."""
    sel = (t >= t_lo) & (t <= t_hi) & (y > 0)
    if np.count_nonzero(sel) < 2:
        raise ValueError("not enough samples in the fitting window")
    return float(-np.polyfit(t[sel], np.log(y[sel]), 1)[0])

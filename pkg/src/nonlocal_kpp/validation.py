"""Quick oracle suite behind ``nonlocal-kpp validate``.

Each check returns one or more :class:`ValidationRecord`.  The suite is
sized to finish in well under a minute at N = 1000; the resolution-dependent
checks scale with the requested N, so coarse grids fail the tight oracle
comparisons while the order-of-accuracy checks keep passing.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .core import BC, Params, Profile, apply_convolution, build_convolution, build_grid
from .evolve import run_ivp
from .oracles import DirichletSeries, NeumannSeries, ValidationRecord, delta_constants, large_D_midpoint
from .stability import analyse
from .steady import SteadyProblem, closed_form_dirichlet, jacobian, l1_norm, newton_solve, residual


def _closed_form_error(a: float, D: float, N: int) -> tuple[float, float]:
    p = SteadyProblem.build(Params(a, D), N)
    exact = closed_form_dirichlet(p.params, p.grid)
    u = newton_solve(p, exact.values * 0.9)
    rel = float(np.max(np.abs(u.values - exact.values)) / np.max(np.abs(exact.values)))
    return rel, l1_norm(p.grid, u)


def check_closed_form(N: int) -> list[ValidationRecord]:
    a, D = 0.45, 0.01
    rel, l1 = _closed_form_error(a, D, N)
    return [
        ValidationRecord("dirichlet closed-form profile, relative sup error", rel, 0.0, 1e-5),
        ValidationRecord("dirichlet closed-form L1 norm", l1, 1.0 - math.pi**2 * D / a**2, 1e-6),
    ]


def check_order(N: int) -> list[ValidationRecord]:
    e1, _ = _closed_form_error(0.45, 0.01, N)
    e2, _ = _closed_form_error(0.45, 0.01, 2 * N)
    return [ValidationRecord("steady profile refinement ratio err(N)/err(2N)", e1 / e2, 4.0, 0.5)]


def check_neumann_constant(N: int) -> list[ValidationRecord]:
    p = SteadyProblem.build(Params(0.4, 0.05, BC.NEUMANN), N)
    u = newton_solve(p, np.full(N + 1, 2.0))
    return [ValidationRecord("neumann constant state 1/a at a = 0.4", float(np.max(np.abs(u.values - 2.5))), 0.0, 1e-10)]


def check_convolution(N: int) -> list[ValidationRecord]:
    worst = 0.0
    for a in (0.3, 0.5, 1.7, 7.25, 20.0):
        grid = build_grid(a, N)
        op = build_convolution(grid)
        c = -3.25
        worst = max(worst, float(np.max(np.abs(apply_convolution(op, np.full(N + 1, c)) - c * (op.beta - op.alpha)))))
    return [ValidationRecord("convolution of a constant, max error", worst, 0.0, 1e-13)]


def check_jacobian(N: int) -> list[ValidationRecord]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for a, D in ((0.4, 0.01), (3.0, 0.002), (10.0, 0.002)):
        p = SteadyProblem.build(Params(a, D), N)
        u = rng.uniform(0.0, 2.0, N + 1)
        v = rng.standard_normal(N + 1)
        eps = 1e-6 * max(1.0, float(np.max(np.abs(u))))
        fd = (residual(p, u + eps * v) - residual(p, u - eps * v)) / (2 * eps)
        jv = jacobian(p, u) @ v
        worst = max(worst, float(np.max(np.abs(fd - jv)) / np.max(np.abs(jv))))
    return [ValidationRecord("jacobian vs central differences, relative", worst, 0.0, 1e-5)]


def check_trivial_spectrum(N: int) -> list[ValidationRecord]:
    a, D = 1.0, 0.05
    p = SteadyProblem.build(Params(a, D), N)
    res = analyse(p, np.zeros(N + 1), mode="iterative", k=4)
    out = []
    for n in (1, 2, 3):
        out.append(ValidationRecord(f"trivial-state eigenvalue n={n}", float(res.spectrum_head[n - 1]), 1 - n**2 * math.pi**2 * D / a**2, 1e-4))
    return out


def check_transcritical(N: int) -> list[ValidationRecord]:
    a = 0.45
    Dc = a * a / math.pi**2
    sig = []
    for D in (Dc * (1 - 1e-3), Dc * (1 + 1e-3)):
        p = SteadyProblem.build(Params(a, D), N)
        sig.append(analyse(p, np.zeros(N + 1), mode="iterative", k=2).sigma_max)
    flips = float(sig[0] > 0 and sig[1] < 0)
    return [ValidationRecord("trivial-state sigma changes sign within 1e-3 of a^2/pi^2", flips, 1.0, 0.0)]


def _series_error(bc: BC, N: int) -> float:
    a, D = 0.4, 0.02
    p = SteadyProblem.build(Params(a, D, bc), N)
    th = math.pi * p.grid.nodes / a
    if bc is BC.DIRICHLET:
        u0 = Profile(np.sin(th) * (1 + np.cos(th)) + np.sin(th) ** 3, p.grid)
        ser = DirichletSeries(a, D, u0)
    else:
        u0 = Profile(1 + 0.5 * np.cos(th) + 0.3 * np.cos(2 * th), p.grid)
        ser = NeumannSeries(a, D, u0)
    ts = np.linspace(0.0, 1.0, 11)
    tr = run_ivp(p, u0, 1.0, ts)
    return max(float(np.max(np.abs(s.values - ser(p.grid.nodes, t)))) for s, t in zip(tr.snapshots, tr.times))


def check_series(N: int) -> list[ValidationRecord]:
    n_ev = max(N // 5, 16)
    return [
        ValidationRecord(f"dirichlet evolution vs exact series (N={n_ev})", _series_error(BC.DIRICHLET, n_ev), 0.0, 1e-4),
        ValidationRecord(f"neumann evolution vs exact series (N={n_ev})", _series_error(BC.NEUMANN, n_ev), 0.0, 1e-4),
    ]


def check_constants(N: int) -> list[ValidationRecord]:
    l, dm, _ = delta_constants()
    return [
        ValidationRecord("l solving 6 tanh(l/2) = l", l, 5.9694, 1e-3),
        ValidationRecord("Delta_m", dm, 0.0928, 1e-3),
    ]


def check_large_D(N: int) -> list[ValidationRecord]:
    a, D = 3.0, 1000.0
    p = SteadyProblem.build(Params(a, D, BC.NEUMANN), N)
    u = newton_solve(p, np.full(N + 1, a / (a - 0.25)))
    mid = float(u.values[N // 2]) if N % 2 == 0 else float(np.interp(a / 2, p.grid.nodes, u.values))
    return [ValidationRecord("large-D neumann midpoint vs composite (a=3, D=1000)", mid, large_D_midpoint(a, D), 1e-2, relative=True)]


CHECKS: dict[str, Callable[[int], list[ValidationRecord]]] = {
    "closed_form": check_closed_form,
    "order": check_order,
    "neumann_constant": check_neumann_constant,
    "convolution": check_convolution,
    "jacobian": check_jacobian,
    "trivial_spectrum": check_trivial_spectrum,
    "transcritical": check_transcritical,
    "series": check_series,
    "constants": check_constants,
    "large_D": check_large_D,
}


def run_suite(N: int = 1000, only: list[str] | None = None) -> list[ValidationRecord]:
    names = only or list(CHECKS)
    unknown = set(names) - set(CHECKS)
    if unknown:
        raise KeyError(f"unknown checks: {sorted(unknown)}")
    records: list[ValidationRecord] = []
    for name in names:
        records.extend(CHECKS[name](N))
    return records


def format_report(records: list[ValidationRecord]) -> str:
    width = max(len(r.quantity) for r in records)
    lines = []
    for r in records:
        err = r.rel_err if r.relative else r.abs_err
        kind = "rel" if r.relative else "abs"
        lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.quantity:<{width}}  numeric={r.numeric:.10g}  oracle={r.oracle:.10g}  {kind}_err={err:.3e}  tol={r.tolerance:.1e}")
    n_fail = sum(not r.passed for r in records)
    lines.append(f"{len(records) - n_fail}/{len(records)} checks passed")
    return "\n".join(lines)

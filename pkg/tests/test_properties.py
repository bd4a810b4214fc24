import math

import numpy as np
import pytest

from nonlocal_kpp.cli import main as cli_main
from nonlocal_kpp.core import Params, Profile
from nonlocal_kpp.evolve import EvolveOptions, decay_rate, run_ivp
from nonlocal_kpp.stability import analyse
from nonlocal_kpp.steady import SteadyProblem, closed_form_dirichlet, newton_solve


def test_subcritical_decay_rate():
    a = 0.4
    D = 2 * a * a / math.pi**2
    p = SteadyProblem.build(Params(a, D), 50)
    tr = run_ivp(p, Profile(np.sin(math.pi * p.grid.nodes / a), p.grid), 10.0, opts=EvolveOptions(stop_when_steady=False))
    rate = decay_rate(tr.history_t, tr.history_sup, 5.0, 10.0)
    assert rate == pytest.approx(math.pi**2 * D / a**2 - 1, rel=0.02)


def test_unstable_mode_grows_at_sigma():
    p = SteadyProblem.build(Params(1.0, 0.05), 100)
    res = analyse(p, np.zeros(101))
    v = np.abs(res.eigenvector.values)
    tr = run_ivp(p, 1e-4 * v / v.max(), 2.0, opts=EvolveOptions(stop_when_steady=False))
    growth = -decay_rate(tr.history_t, tr.history_sup, 0.5, 2.0)
    assert growth == pytest.approx(res.sigma_max, rel=0.05)


def test_stable_state_attracts_perturbation():
    p = SteadyProblem.build(Params(0.45, 0.01), 100)
    us = newton_solve(p, closed_form_dirichlet(p.params, p.grid)).values
    res = analyse(p, us)
    assert res.sigma_max < 0
    start = us + 1e-4 * res.eigenvector.values
    dists = []
    run_ivp(p, start, 6.0, opts=EvolveOptions(stop_when_steady=False), monitor=lambda t, u: dists.append((t, np.max(np.abs(u - us)))))
    t, d = np.array(dists).T
    assert d[-1] < 0.1 * d[0]
    assert -decay_rate(t, d, 1.0, 6.0) == pytest.approx(res.sigma_max, rel=0.05)


def test_hysteresis_sweep_at_small_D(tmp_path):
    argv = ["sweep-hysteresis", "--D", "2e-3", "--N", "400", "--a-from", "9", "--a-to", "11", "--da", "0.5", "--out", str(tmp_path)]
    assert cli_main(argv) == 0
    rows = [line.split(",") for line in (tmp_path / "sweep.csv").read_text().splitlines()[1:]]
    up = {round(float(r[1]), 6): int(r[2]) for r in rows if r[0] == "up"}
    down = {round(float(r[1]), 6): int(r[2]) for r in rows if r[0] == "down"}
    assert all(r[5] == "1" for r in rows)
    differing = [a for a in down if up[a] != down[a]]
    assert differing, (up, down)

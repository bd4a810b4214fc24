import json

import numpy as np
import pytest

from nonlocal_kpp import serialize as io
from nonlocal_kpp.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main, sweep_schedule
from nonlocal_kpp.core import Profile, build_grid


def read_bytes(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file() and p.name != "timing.json"}


def test_steady_writes_profile_and_summary(tmp_path):
    assert main(["steady", "--a", "0.45", "--D", "0.01", "--N", "200", "--out", str(tmp_path)]) == EXIT_OK
    x, u = io.read_profile(tmp_path / "profile.csv")
    assert x.size == 201 and u.max() > 1.7
    summary = io.read_json(tmp_path / "summary.json")
    assert summary["peaks"] == 1 and summary["residual"] < 1e-10


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"a": 0.45, "D": 0.01, "N": 100}))
    out = tmp_path / "o"
    assert main(["steady", "--config", str(cfg), "--N", "120", "--out", str(out)]) == EXIT_OK
    assert io.read_json(out / "summary.json")["N"] == 120


def test_unknown_config_key_is_config_error(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"a": 0.45, "diffusivity": 0.01}))
    assert main(["steady", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert io.read_json(tmp_path / "error.json")["error"] == "config"


@pytest.mark.parametrize(
    "argv",
    [
        ["steady", "--a", "-1", "--D", "0.01"],
        ["steady", "--a", "1", "--D", "0.01", "--N", "4"],
        ["evolve", "--a", "1", "--D", "0.01", "--x0", "0.01", "--N", "50"],
        ["steady", "--D", "0.01"],
    ],
)
def test_bad_input_exit_code(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_CONFIG


def test_newton_failure_is_numerical_error(tmp_path):
    rc = main(["steady", "--a", "3", "--D", "0.002", "--N", "100", "--max-iter", "1", "--out", str(tmp_path)])
    assert rc == EXIT_NUMERICAL
    assert (tmp_path / "last_iterate.csv").exists()


def test_round_trip_as_guess(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["steady", "--a", "2.2", "--D", "0.01", "--N", "150", "--out", str(a)]) == EXIT_OK
    argv = ["steady", "--a", "2.2", "--D", "0.01", "--N", "150", "--guess", "file", "--guess-file", str(a / "profile.csv")]
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    _, u1 = io.read_profile(a / "profile.csv")
    _, u2 = io.read_profile(b / "profile.csv")
    assert np.max(np.abs(u1 - u2)) <= 1e-12


def test_outputs_are_deterministic(tmp_path):
    runs = []
    for k in range(2):
        d = tmp_path / str(k)
        argv = ["evolve", "--a", "1.5", "--D", "0.01", "--N", "60", "--ic", "random", "--seed", "3", "--t-end", "1", "--snapshots", "0.5", "1"]
        assert main(argv + ["--out", str(d)]) == EXIT_OK
        runs.append(read_bytes(d))
    assert runs[0] == runs[1]
    assert (tmp_path / "0" / "timing.json").exists()


def test_continue_writes_branch(tmp_path):
    argv = ["continue", "--D", "0.01", "--N", "80", "--a-stop", "0.6", "--stability", "--snapshot-stride", "50", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    header = (tmp_path / "branch_00.csv").read_text().splitlines()[0]
    assert header == "a,A,sigma_max,stable,peaks,is_fold"
    meta = io.read_json(tmp_path / "branch.json")
    assert meta["segments"][0]["stall_reason"] is None
    assert list((tmp_path / "profiles").glob("*.csv"))


def test_stability_command(tmp_path):
    assert main(["stability", "--a", "1", "--D", "0.05", "--N", "100", "--guess", "trivial", "--out", str(tmp_path)]) == EXIT_OK
    s = io.read_json(tmp_path / "summary.json")
    assert s["sigma_max"] == pytest.approx(1 - np.pi**2 * 0.05, abs=1e-3)
    assert s["classification"] == "unstable"
    assert (tmp_path / "spectrum.csv").exists() and (tmp_path / "eigenvector.csv").exists()


def test_validate_coarse_grid_fails_tight_checks(tmp_path, capsys):
    assert main(["validate", "--N", "32", "--checks", "closed_form", "order", "--out", str(tmp_path)]) == EXIT_VALIDATION
    report = json.loads((tmp_path / "validation.json").read_text())
    by_name = {r["quantity"]: r["pass"] for r in report}
    assert by_name["steady profile refinement ratio err(N)/err(2N)"]
    assert not by_name["dirichlet closed-form profile, relative sup error"]


def test_sweep_schedule():
    sched = sweep_schedule(9.0, 9.2, 0.1)
    assert [p for p, _ in sched] == ["up", "up", "up", "down", "down"]
    assert [a for _, a in sched] == pytest.approx([9.0, 9.1, 9.2, 9.1, 9.0])
    assert sweep_schedule(1.0, 1.0, 0.1) == [("up", 1.0)]


def test_single_point_sweep_equals_evolve(tmp_path):
    common = ["--D", "0.01", "--N", "60", "--x0", "0.5"]
    assert main(["sweep-hysteresis", "--a-from", "1", "--a-to", "1", "--da", "0.1", "--t-max", "400", *common, "--out", str(tmp_path / "s")]) == EXIT_OK
    assert main(["evolve", "--a", "1", "--t-end", "400", "--until-steady", *common, "--out", str(tmp_path / "e")]) == EXIT_OK
    row = (tmp_path / "s" / "sweep.csv").read_text().splitlines()[1].split(",")
    summary = io.read_json(tmp_path / "e" / "summary.json")
    assert int(row[2]) == summary["terminal_peaks"]
    assert float(row[4]) == summary["t_final"]


def test_csv_round_trip_precision(tmp_path):
    g = build_grid(1.0, 10)
    u = np.random.default_rng(0).random(11) / 3
    io.write_profile(tmp_path / "p.csv", Profile(u, g))
    x, v = io.read_profile(tmp_path / "p.csv")
    assert np.array_equal(v, u) and np.array_equal(x, g.nodes)


def test_csv_empty_cells_and_json_nan(tmp_path):
    io.write_csv(tmp_path / "t.csv", ("a", "b", "c"), [(1.5, None, True), (float("nan"), 2, False)])
    assert (tmp_path / "t.csv").read_text() == "a,b,c\n1.5,,1\n,2,0\n"
    io.write_json(tmp_path / "t.json", {"x": float("nan"), "y": np.float64(2.0)})
    assert json.loads((tmp_path / "t.json").read_text()) == {"x": None, "y": 2.0}


def test_profile_stretched_onto_new_domain(tmp_path):
    g = build_grid(1.0, 20)
    io.write_profile(tmp_path / "p.csv", Profile(np.sin(np.pi * g.nodes), g))
    g2 = build_grid(2.0, 40)
    p = io.profile_on_grid(tmp_path / "p.csv", g2)
    np.testing.assert_allclose(p.values, np.sin(np.pi * g2.nodes / 2), atol=1e-2)

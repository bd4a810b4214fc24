"""Command-line front end: steady, continue, evolve, stability, sweep-hysteresis, validate.

Every option can also be given in a JSON config file (``--config``) under
the same name as the flag's destination (``a_stop`` for ``--a-stop``);
flags on the command line win.  Exit codes: 0 success (including a branch
that ended in a stall), 2 invalid configuration, 3 numerical failure or
blow-up, 4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import serialize as io
from .continuation import (
    Branch,
    ContinuationOptions,
    annotate_stability,
    seed_point,
    trace,
    trace_with_restarts,
)
from .core import BC, Params, Profile
from .errors import BlowUpError, ConvergenceError, DomainError, InvalidResolutionError, ParameterError
from .evolve import BumpIC, EvolveOptions, bump_profile, random_profile, run_ivp
from .oracles import DELTA_1, small_D_profile
from .stability import analyse
from .steady import NewtonOptions, SteadyProblem, closed_form_dirichlet, count_peaks, l1_norm, newton_solve, residual

log = logging.getLogger("nonlocal_kpp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict] = {
    "common": {"bc": "dirichlet", "N": 1000, "out": "out", "jobs": 1, "verbose": False},
    "steady": {"a": None, "D": 0.01, "guess": "auto", "guess_file": None, "r": None, "tol": 1e-10, "max_iter": 50},
    "continue": {
        "D": 0.05,
        "a_start": None,
        "a_stop": 3.0,
        "ds_init": 1e-3,
        "ds_min": 1e-6,
        "ds_max": 5e-3,
        "max_points": 100_000,
        "restarts": False,
        "stability": False,
        "stability_stride": 10,
        "snapshot_stride": 0,
    },
    "evolve": {
        "a": None,
        "D": 0.01,
        "ic": "bump",
        "x0": None,
        "w": 0.1,
        "amp": 0.01,
        "seed": 0,
        "ic_file": None,
        "t_end": 10.0,
        "snapshots": [],
        "max_change": 1e-4,
        "until_steady": False,
    },
    "stability": {"a": None, "D": 0.01, "profile_file": None, "guess": "auto", "r": None, "k": 6, "mode": "auto"},
    "sweep-hysteresis": {
        "D": 2e-3,
        "a_from": 9.0,
        "a_to": 11.0,
        "da": 0.1,
        "x0": None,
        "w": 0.1,
        "amp": 0.01,
        "t_max": 20_000.0,
    },
    "validate": {"checks": None},
}


# -- argument parsing ---------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option values (flags override)")
    p.add_argument("--bc", choices=["dirichlet", "neumann"])
    p.add_argument("--N", type=int, help="number of grid intervals")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker processes for independent solves")
    p.add_argument("--verbose", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlocal-kpp", description="Nonlocal Fisher-KPP solver with a top-hat kernel on [0, a].")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", help="Newton solve for one steady state")
    _common(p)
    p.add_argument("--a", type=float)
    p.add_argument("--D", type=float)
    p.add_argument("--guess", choices=["auto", "closed-form", "constant", "sine", "small-d", "file"])
    p.add_argument("--guess-file", dest="guess_file")
    p.add_argument("--r", type=int, help="peak count for the small-D guess")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)

    p = sub.add_parser("continue", help="pseudo-arclength trace of the primary branch")
    _common(p)
    p.add_argument("--D", type=float)
    p.add_argument("--a-start", dest="a_start", type=float, help="seed location (default chosen from D and bc)")
    p.add_argument("--a-stop", dest="a_stop", type=float)
    p.add_argument("--ds-init", dest="ds_init", type=float)
    p.add_argument("--ds-min", dest="ds_min", type=float)
    p.add_argument("--ds-max", dest="ds_max", type=float)
    p.add_argument("--max-points", dest="max_points", type=int)
    p.add_argument("--restarts", action="store_true", default=None, help="restart past cusps (small D)")
    p.add_argument("--stability", action="store_true", default=None, help="annotate points with sigma_max")
    p.add_argument("--stability-stride", dest="stability_stride", type=int)
    p.add_argument("--snapshot-stride", dest="snapshot_stride", type=int, help="write every k-th profile (0: none)")

    p = sub.add_parser("evolve", help="time integration from an initial condition")
    _common(p)
    p.add_argument("--a", type=float)
    p.add_argument("--D", type=float)
    p.add_argument("--ic", choices=["bump", "random", "closed-form", "constant", "file"])
    p.add_argument("--x0", type=float)
    p.add_argument("--w", type=float)
    p.add_argument("--amp", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--ic-file", dest="ic_file")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--snapshots", type=float, nargs="*")
    p.add_argument("--max-change", dest="max_change", type=float)
    p.add_argument("--until-steady", dest="until_steady", action="store_true", default=None)

    p = sub.add_parser("stability", help="leading eigenvalues about a steady state")
    _common(p)
    p.add_argument("--a", type=float)
    p.add_argument("--D", type=float)
    p.add_argument("--profile-file", dest="profile_file", help="steady profile (x,u); solved first when absent")
    p.add_argument("--guess", choices=["auto", "closed-form", "constant", "sine", "small-d", "file", "trivial"])
    p.add_argument("--r", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--mode", choices=["auto", "dense", "iterative"])

    p = sub.add_parser("sweep-hysteresis", help="quasi-static up/down sweep in a by time evolution")
    _common(p)
    p.add_argument("--D", type=float)
    p.add_argument("--a-from", dest="a_from", type=float)
    p.add_argument("--a-to", dest="a_to", type=float)
    p.add_argument("--da", type=float)
    p.add_argument("--x0", type=float)
    p.add_argument("--w", type=float)
    p.add_argument("--amp", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)

    p = sub.add_parser("validate", help="oracle comparison suite")
    _common(p)
    p.add_argument("--checks", nargs="*")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {**DEFAULTS["common"], **DEFAULTS[args.command]}
    if args.config:
        try:
            file_cfg = io.read_json(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for '{args.command}': {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config")})
    cfg["command"] = args.command
    return cfg


def _params(cfg: dict, a_key: str = "a") -> Params:
    a = cfg.get(a_key)
    if a is None:
        raise ConfigError(f"--{a_key.replace('_', '-')} is required")
    try:
        return Params(a, cfg["D"], cfg["bc"])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def _problem(cfg: dict, a_key: str = "a") -> SteadyProblem:
    params = _params(cfg, a_key)
    try:
        return SteadyProblem.build(params, cfg["N"])
    except InvalidResolutionError as exc:
        raise ConfigError(str(exc)) from exc


# -- guesses -----------------------------------------------------------------------------


def _guess(p: SteadyProblem, kind: str, cfg: dict) -> np.ndarray:
    a, D, bc = p.params.a, p.params.D, p.bc
    x = p.grid.nodes
    if kind == "file":
        path = cfg.get("guess_file") or cfg.get("profile_file")
        if not path:
            raise ConfigError("--guess file needs --guess-file")
        return io.profile_on_grid(path, p.grid).values
    if kind == "trivial":
        return np.zeros_like(x)
    if kind == "small-d":
        if cfg.get("r") is None:
            raise ConfigError("--guess small-d needs --r")
        try:
            return small_D_profile(a, D, cfg["r"], bc, p.grid).values
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "auto":
        if bc is BC.NEUMANN:
            kind = "constant"
        elif a <= 0.5 and D < a * a / math.pi**2:
            kind = "closed-form"
        else:
            kind = "sine"
    if kind == "closed-form":
        try:
            return closed_form_dirichlet(p.params, p.grid).values
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "constant":
        level = 1.0 / a if a <= 0.5 else a / (a - 0.25)
        return np.full_like(x, level)
    if kind == "sine":
        return np.sin(math.pi * x / a) if bc is BC.DIRICHLET else np.ones_like(x)
    raise ConfigError(f"unknown guess {kind!r}")


def _steady_summary(p: SteadyProblem, u: np.ndarray) -> dict:
    return {
        "a": p.params.a,
        "D": p.params.D,
        "bc": p.bc.value,
        "N": p.N,
        "L1": l1_norm(p.grid, u),
        "sup_norm": float(np.max(np.abs(u))),
        "peaks": count_peaks(u, 0.1, p.bc) if np.max(u) > 0 else 0,
        "residual": float(np.max(np.abs(residual(p, u)))),
    }


def _error_json(out: Path, kind: str, exc: Exception, **extra) -> None:
    io.write_json(out / "error.json", {"error": kind, "message": str(exc), **extra})


# -- commands ---------------------------------------------------------------------------------


def cmd_steady(cfg: dict) -> int:
    p = _problem(cfg)
    out = Path(cfg["out"])
    guess = _guess(p, cfg["guess"], cfg)
    try:
        u = newton_solve(p, guess, NewtonOptions(tol_residual=cfg["tol"], max_iter=cfg["max_iter"])).values
    except ConvergenceError as exc:
        _error_json(out, "convergence", exc, residual_norm=exc.residual_norm, iterations=exc.iterations)
        if exc.iterate is not None:
            io.write_profile(out / "last_iterate.csv", Profile(exc.iterate, p.grid))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    io.write_profile(out / "profile.csv", Profile(u, p.grid))
    summary = _steady_summary(p, u)
    io.write_json(out / "summary.json", summary)
    print(json.dumps({k: summary[k] for k in ("a", "L1", "sup_norm", "peaks", "residual")}))
    return EXIT_OK


def _branch_rows(branch: Branch):
    for pt in branch:
        yield (pt.a, pt.A, pt.sigma_max, pt.stable, pt.peaks, pt.is_fold)


def write_branches(out: Path, segments: list[Branch], cfg: dict) -> None:
    meta = {"segments": []}
    for k, br in enumerate(segments):
        name = f"branch_{k:02d}.csv"
        io.write_csv(out / name, ("a", "A", "sigma_max", "stable", "peaks", "is_fold"), _branch_rows(br))
        meta["segments"].append({"file": name, **br.metadata()})
        stride = cfg.get("snapshot_stride") or 0
        if stride > 0:
            for i in sorted(set(range(0, len(br), stride)) | set(br.folds)):
                io.write_profile(out / "profiles" / f"seg{k:02d}_pt{i:06d}.csv", br[i].profile)
    meta["config"] = {k: v for k, v in cfg.items() if k not in ("out",)}
    io.write_json(out / "branch.json", meta)


def cmd_continue(cfg: dict) -> int:
    if cfg["a_stop"] is None or cfg["a_stop"] <= 0:
        raise ConfigError("--a-stop must be > 0")
    try:
        opts = ContinuationOptions(
            ds_init=cfg["ds_init"], ds_min=cfg["ds_min"], ds_max=cfg["ds_max"], a_stop=cfg["a_stop"], max_points=cfg["max_points"]
        )
        params = Params(cfg["a_start"] or 0.4, cfg["D"], cfg["bc"])
    except (ValueError, ParameterError) as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(cfg["out"])
    try:
        seed = seed_point(params, cfg["N"], a0=cfg["a_start"], opts=opts)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    except ConvergenceError as exc:
        _error_json(out, "seed", exc)
        print(f"error: could not converge the seed state: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    problem = SteadyProblem.build(params.with_a(seed.a), cfg["N"])
    segments = trace_with_restarts(problem, seed, opts) if cfg["restarts"] else [trace(problem, seed, opts)]
    if cfg["stability"]:
        for br in segments:
            annotate_stability(br, stride=cfg["stability_stride"], jobs=cfg["jobs"])
    write_branches(out, segments, cfg)
    for k, br in enumerate(segments):
        print(f"segment {k}: {len(br)} points, a in [{br.a.min():.4f}, {br.a.max():.4f}], folds {len(br.folds)}, stall: {br.stall_reason}")
    return EXIT_OK


def _initial(p: SteadyProblem, cfg: dict) -> tuple[Profile, dict]:
    kind = cfg["ic"]
    a = p.params.a
    if kind == "bump":
        x0 = a / 2 if cfg["x0"] is None else cfg["x0"]
        ic = BumpIC(x0, cfg["w"], cfg["amp"])
        try:
            return bump_profile(p.grid, ic), {"kind": "bump", "x0": x0, "w": ic.w, "amp": ic.amp}
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "random":
        return random_profile(p.grid, cfg["seed"], p.bc), {"kind": "random", "seed": cfg["seed"]}
    if kind == "closed-form":
        try:
            return closed_form_dirichlet(p.params, p.grid), {"kind": "closed-form"}
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "constant":
        return Profile(np.full(p.N + 1, cfg["amp"]), p.grid), {"kind": "constant", "value": cfg["amp"]}
    if kind == "file":
        if not cfg["ic_file"]:
            raise ConfigError("--ic file needs --ic-file")
        return io.profile_on_grid(cfg["ic_file"], p.grid), {"kind": "file", "path": str(cfg["ic_file"])}
    raise ConfigError(f"unknown initial condition {kind!r}")


def cmd_evolve(cfg: dict) -> int:
    p = _problem(cfg)
    if cfg["t_end"] is None or cfg["t_end"] <= 0:
        raise ConfigError("--t-end must be > 0")
    out = Path(cfg["out"])
    u0, ic_meta = _initial(p, cfg)
    try:
        opts = EvolveOptions(max_change=cfg["max_change"], reject_change=2 * cfg["max_change"], stop_when_steady=bool(cfg["until_steady"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    snaps = sorted(cfg["snapshots"] or [])
    try:
        tr = run_ivp(p, u0, cfg["t_end"], snaps, opts)
    except BlowUpError as exc:
        last = exc.last_state
        if last is not None:
            io.write_profile(out / "last_state.csv", last.profile)
        _error_json(out, "blow-up", exc, t=None if last is None else last.t)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    for t, s in zip(tr.times, tr.snapshots):
        io.write_profile(out / "snapshots" / f"t_{t:.6f}.csv", s)
    io.write_profile(out / "final.csv", tr.final)
    summary = {"params": {"a": p.params.a, "D": p.params.D, "bc": p.bc.value, "N": p.N}, "ic": ic_meta, **tr.summary()}
    wall = summary.pop("wall_time")
    io.write_json(out / "summary.json", summary)
    # wall-clock time is kept apart so the summary stays reproducible byte for byte
    io.write_json(out / "timing.json", {"wall_time": wall})
    print(json.dumps({k: summary[k] for k in ("t_final", "steady", "terminal_peaks", "terminal_residual")}))
    return EXIT_OK


def cmd_stability(cfg: dict) -> int:
    if cfg["profile_file"]:
        grid = io.grid_from_profile_file(cfg["profile_file"])
        cfg = {**cfg, "a": grid.a, "N": grid.N}
    p = _problem(cfg)
    out = Path(cfg["out"])
    if cfg["profile_file"]:
        u = io.profile_on_grid(cfg["profile_file"], p.grid).values
    elif cfg["guess"] == "trivial":
        u = np.zeros(p.N + 1)
    else:
        try:
            u = newton_solve(p, _guess(p, cfg["guess"], cfg)).values
        except ConvergenceError as exc:
            _error_json(out, "convergence", exc)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
    res = analyse(p, u, mode=cfg["mode"], k=cfg["k"])
    io.write_csv(out / "spectrum.csv", ("index", "sigma"), enumerate(res.spectrum_head, start=1))
    io.write_profile(out / "eigenvector.csv", res.eigenvector)
    summary = {
        **_steady_summary(p, u),
        "sigma_max": res.sigma_max,
        "classification": res.classification.value,
        "max_imag": res.max_imag,
        "mode": res.mode,
        "symmetric_defect": res.symmetric_defect,
        "warnings": res.warnings,
    }
    io.write_json(out / "summary.json", summary)
    print(json.dumps({k: summary[k] for k in ("sigma_max", "classification")}))
    return EXIT_OK


def sweep_schedule(a_from: float, a_to: float, da: float) -> list[tuple[str, float]]:
    n = max(int(round(abs(a_to - a_from) / da)), 0)
    up = [a_from + k * (a_to - a_from) / n for k in range(n + 1)] if n else [a_from]
    return [("up", a) for a in up] + [("down", a) for a in reversed(up[:-1])]


def cmd_sweep_hysteresis(cfg: dict) -> int:
    D, bc, N = cfg["D"], cfg["bc"], cfg["N"]
    if cfg["da"] is None or cfg["da"] <= 0:
        raise ConfigError("--da must be > 0")
    try:
        Params(cfg["a_from"], D, bc)
        Params(cfg["a_to"], D, bc)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if D >= DELTA_1:
        log.warning("D = %g is not below %g; no overlapping echelons are expected", D, DELTA_1)
    out = Path(cfg["out"])
    schedule = sweep_schedule(cfg["a_from"], cfg["a_to"], cfg["da"])
    rows = []
    u = None
    opts = EvolveOptions(stop_when_steady=True)
    for phase, a in schedule:
        p = SteadyProblem.build(Params(a, D, bc), N)
        if u is None:
            x0 = a / 2 if cfg["x0"] is None else cfg["x0"]
            u0 = bump_profile(p.grid, BumpIC(x0, cfg["w"], cfg["amp"]))
        else:
            # fixed node count: the previous attractor is stretched onto the new domain
            u0 = Profile(u, p.grid)
        try:
            tr = run_ivp(p, u0, cfg["t_max"], (), opts)
        except BlowUpError as exc:
            _error_json(out, "blow-up", exc, a=a, phase=phase)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        u = tr.final.values
        rows.append((phase, a, tr.terminal_peaks, l1_norm(p.grid, u), tr.t_final, tr.steady))
        log.info("%s a=%.4f peaks=%d L1=%.6f", phase, a, tr.terminal_peaks, rows[-1][3])
    io.write_csv(out / "sweep.csv", ("pass", "a", "peaks", "L1", "t_settle", "steady"), rows)
    io.write_json(out / "sweep.json", {"config": {k: v for k, v in cfg.items() if k != "out"}, "n_points": len(rows)})
    for r in rows:
        print(f"{r[0]:>4} a={r[1]:.4f} peaks={r[2]} L1={r[3]:.6f}")
    return EXIT_OK


def cmd_validate(cfg: dict) -> int:
    from .validation import format_report, run_suite

    out = Path(cfg["out"])
    try:
        records = run_suite(cfg["N"], cfg["checks"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    except InvalidResolutionError as exc:
        raise ConfigError(str(exc)) from exc
    report = format_report(records)
    io.write_json(out / "validation.json", [r.to_dict() for r in records])
    io._atomic_write(out / "validation.txt", report + "\n")
    print(report)
    return EXIT_OK if all(r.passed for r in records) else EXIT_VALIDATION


COMMANDS = {
    "steady": cmd_steady,
    "continue": cmd_continue,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "sweep-hysteresis": cmd_sweep_hysteresis,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        logging.basicConfig(level=logging.INFO if cfg["verbose"] else logging.WARNING, format="%(levelname)s %(message)s")
        if cfg["N"] is None or int(cfg["N"]) != cfg["N"] or cfg["N"] < 8:
            raise ConfigError(f"N must be an integer >= 8, got {cfg['N']}")
        if cfg["jobs"] < 1:
            raise ConfigError("--jobs must be >= 1")
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        out = Path(vars(args).get("out") or DEFAULTS["common"]["out"])
        try:
            _error_json(out, "config", exc)
        except OSError:
            pass
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

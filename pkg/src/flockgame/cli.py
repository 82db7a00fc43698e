"""Command line front end.

    flockgame simulate CONFIG   run one flock and write series.csv + report.txt
    flockgame nash CONFIG       solve an opinion game and write nash_report.txt + sweep.csv
    flockgame sweep CONFIG      repeat simulate over the values of one config key
    flockgame verify SUITE      run a verification suite (or "all")

Relative output directories are resolved against $FLOCKGAME_OUTPUT (default:
the working directory). Exit status: 0 when every selected invariant or check
passes, 1 when one fails, 2 for config errors, 3 for integration or solver
failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import checks, nash
from .config import ConfigError, GameConfig, RunConfig, get_path, parse_config, parse_game_config, set_path
from .diagnostics import FRAME_FIELDS, fit_rate, floor_window, one_minus_cos
from .dynamics import IntegrationError, Trajectory, integrate, speed_bound
from .scenarios import fat_lyapunov, sectorial_speed_floor

ENV_OUTPUT = "FLOCKGAME_OUTPUT"
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
SERIES_HEADER = ("t",) + FRAME_FIELDS


def fmt(x) -> str:
    """Fixed-point decimal with 12 significant digits; ``nan``/``inf`` spelled out."""
    x = float(x)
    if not np.isfinite(x):
        return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_value(u) for u in v)
    return str(v)


def write_report(path: Path, items: list) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, val in items:
            fh.write(f"{key}: {_value(val)}\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, _, val = line.partition(": ")
        out[key] = val
    return out


def write_series(path: Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for t, frame in zip(traj.t, traj.frames):
            w.writerow([fmt(t)] + [fmt(u) for u in frame.as_row()])


def read_series(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != SERIES_HEADER:
        raise ValueError(f"unexpected header {rows[0]}")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(SERIES_HEADER))
    return {name: data[:, k] for k, name in enumerate(SERIES_HEADER)}


def output_root(override: Optional[str] = None) -> Path:
    return Path(override or os.environ.get(ENV_OUTPUT) or ".")


def resolve_dir(root: Path, configured: Optional[str], fallback: str) -> Path:
    d = Path(configured or fallback)
    return d if d.is_absolute() else root / d


# -- simulate ---------------------------------------------------------------

REQUIRED_PROBES = {"gamma_le_gamma2d": ("gamma", "gamma2d"), "flock_diameter_bounded": ("D",),
                   "a_monotone": ("A",)}


def _probes(cfg: RunConfig) -> tuple:
    need = set(cfg.probes)
    for inv in cfg.invariants:
        need.update(REQUIRED_PROBES.get(inv, ()))
    for name in cfg.fits:
        need.add("gamma2d" if name == "one_minus_cos_gamma2d" else name)
    return tuple(f for f in FRAME_FIELDS if f in need)


def evaluate_invariants(cfg: RunConfig, traj: Trajectory) -> list:
    """(name, passed, detail items) for each selected invariant."""
    out = []
    state0 = cfg.state
    speeds = np.linalg.norm(traj.v, axis=2)
    for name in cfg.invariants:
        detail = []
        if name == "no_blowup":
            ok = not traj.terminated_early
        elif name == "velocity_bound":
            bound = speed_bound(state0, cfg.params)
            top = float(speeds.max())
            ok = top <= bound * (1 + 1e-9)
            detail = [("max_speed", top), ("speed_bound", bound)]
        elif name == "theta_conservation":
            mom = traj.theta @ traj.m
            drift = float(np.max(np.abs(mom - mom[0])) / mom[0])
            ok = drift <= 1e-10
            detail = [("theta_momentum_drift", drift)]
        elif name == "sector_preserved":
            low = float(traj.v[:, :, -1].min())
            ok = low >= 0
            detail = [("min_vertical_velocity", low)]
        elif name == "speed_floor":
            try:
                c0 = sectorial_speed_floor(state0, cfg.params)
            except ValueError:
                c0 = float("nan")
            low = float(speeds.min())
            ok = bool(c0 > 0 and low >= c0)
            detail = [("min_speed", low), ("speed_floor_c0", c0)]
        elif name == "gamma_le_gamma2d":
            gap = float(np.nanmax(traj.series("gamma") - traj.series("gamma2d")))
            ok = gap <= 1e-9
            detail = [("max_gamma_minus_gamma2d", gap)]
        elif name == "flock_diameter_bounded":
            D = traj.series("D")
            ratio = float(D.max() / D[: len(D) // 2 + 1].max()) if D[0] > 0 else float("nan")
            ok = bool(ratio <= 1.05)
            detail = [("diameter_ratio", ratio)]
        elif name == "a_monotone":
            A = traj.series("A")
            rise = float(np.max(np.diff(A) / A[:-1])) if len(A) > 1 else 0.0
            ok = rise <= 1e-12
            detail = [("max_relative_A_rise", rise)]
        elif name == "misaligned":
            beta, r0 = cfg.scenario_args["beta"], cfg.scenario_args["r0"]
            L0 = fat_lyapunov(state0, beta, r0)
            gap = float(np.min(traj.v[:, 0, 0] - L0))
            x1_step = float(np.min(np.diff(traj.x[:, 0, 0]))) if len(traj.t) > 1 else 0.0
            ok = bool(L0 > 0 and gap >= -1e-6 and x1_step > 0)
            detail = [("lyapunov_initial", L0), ("min_v1_minus_lyapunov_initial", gap), ("min_x1_step", x1_step)]
        else:
            raise KeyError(name)
        out.append((name, bool(ok), detail))
    return out


def _fits(cfg: RunConfig, traj: Trajectory) -> list:
    items = []
    for name, window in cfg.fits.items():
        if name == "one_minus_cos_gamma2d":
            g2d = traj.series("gamma2d")
            values = one_minus_cos(g2d)
            if window is None:
                window = floor_window(traj.t, g2d)
        else:
            values = traj.series(name)
        try:
            fit = fit_rate(traj.t, values, window)
            items += [(f"rate_{name}", fit.rate), (f"r2_{name}", fit.r_squared), (f"window_{name}", fit.window)]
        except ValueError as e:
            items += [(f"rate_{name}", float("nan")), (f"fit_error_{name}", str(e))]
    return items


def run(cfg: RunConfig, out_dir: Path) -> int:
    """Integrate, write series.csv and report.txt into ``out_dir``, return the exit status."""
    out_dir.mkdir(parents=True, exist_ok=True)
    items = [("scenario", cfg.scenario)]
    items += [(f"scenario.{k}", v) for k, v in cfg.scenario_args.items() if v is not None]
    p = cfg.params
    items += [("params.sigma", p.sigma), ("params.kappa", p.kappa), ("params.p", p.p)]
    items += [(f"params.kernel.{k}", v) for k, v in p.kernel.to_dict().items()]
    spec = cfg.integrator
    items += [("integrator.dt", spec.dt), ("integrator.t_final", spec.t_final),
              ("integrator.record_every", spec.record_every), ("agents", cfg.state.N), ("dimension", cfg.state.n)]
    status = EXIT_OK
    try:
        traj = integrate(cfg.state, p, spec, probes=_probes(cfg), grid_size=cfg.grid_size)
        items.append(("status", "terminated_early" if traj.terminated_early else "ok"))
        if traj.terminated_early:
            items.append(("reason", traj.reason))
    except IntegrationError as e:
        traj = e.partial
        status = EXIT_RUNTIME
        items += [("status", "integration_error"), ("reason", str(e))]
    items += [("partial", status == EXIT_RUNTIME), ("frames", len(traj.t)), ("t_end", float(traj.t[-1]))]
    write_series(out_dir / "series.csv", traj)

    items += _fits(cfg, traj)
    last = traj.frames[-1]
    items += [(f"final_{f}", getattr(last, f)) for f in FRAME_FIELDS if f in _probes(cfg)]
    invariants = evaluate_invariants(cfg, traj)
    for name, ok, detail in invariants:
        items.append((name, ok))
        items += detail
    passed = all(ok for _, ok, _ in invariants)
    items.append(("invariants_passed", passed))
    write_report(out_dir / "report.txt", items)
    if status == EXIT_OK and not passed:
        status = EXIT_FAILED
    return status


# -- nash ---------------------------------------------------------------------

def nash_cmd(cfg: GameConfig, out_dir: Path) -> int:
    """Solve, certify and verify the game; write nash_report.txt and sweep.csv."""
    out_dir.mkdir(parents=True, exist_ok=True)
    game = cfg.game
    items = [("agents", game.N), ("theta", game.theta), ("m", game.m), ("sigma", game.sigma), ("p", game.p)]
    try:
        eq, agree, worst = nash.multistart(game, cfg.seeds, cfg.rng_seed)
    except nash.SolverError as e:
        items += [("status", "solver_error"), ("reason", str(e)), ("best_iterate", e.best),
                  ("best_residual_norm", e.residual_norm)]
        write_report(out_dir / "nash_report.txt", items)
        return EXIT_RUNTIME
    report = nash.verify_nash(eq, game, cfg.verify_grid)
    structure = nash.structure_report(eq, game)
    a, b = nash.momentum(eq.y_star, game)
    trivial = bool(game.is_consensus() and np.all(eq.y_star == game.theta[0] ** (1.0 / game.p)))
    certified = bool(eq.jacobian_det > 0 and eq.minors_positive and eq.d_positive and eq.mass_ratio_sum < 1)
    items += [("status", "ok"), ("y_star", eq.y_star), ("residual_norm", eq.residual_norm),
              ("iterations", eq.iterations), ("jacobian_det", eq.jacobian_det), ("leading_minors", eq.minors),
              ("d", eq.d), ("mass_ratio_sum", eq.mass_ratio_sum), ("certified", certified),
              ("shift_index", eq.shift_index), ("y_bar", eq.y_bar),
              ("momentum_relative_gap", abs(a - b) / abs(b)),
              ("multistart_agree", f"{agree}/{cfg.seeds}"), ("multistart_max_deviation", worst),
              ("verify_nash", report.verified), ("verify_offenders", len(report.offenders)),
              ("structure_ok", structure.ok), ("unique_trivial", trivial)]
    for agent, r, gain in report.offenders[:10]:
        items.append((f"offender_{agent}", (r, gain)))

    rows = nash.asymptotic_sweep(game, cfg.sigmas)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sigma", "dist_conviction", "dist_consensus"] + [f"y{i + 1}" for i in range(game.N)])
        for row in rows:
            w.writerow([fmt(row.sigma), fmt(row.dist_conviction), fmt(row.dist_consensus)]
                       + [fmt(y) for y in row.y_star])
    order = np.argsort([r.sigma for r in rows])
    conv = np.array([rows[k].dist_conviction for k in order])
    cons = np.array([rows[k].dist_consensus for k in order])
    tol = 1e-12
    items += [("sweep_sigmas", [rows[k].sigma for k in order]),
              ("sweep_conviction_nonincreasing", bool(np.all(np.diff(conv) <= tol))),
              ("sweep_consensus_nondecreasing", bool(np.all(np.diff(cons) >= -tol)))]
    write_report(out_dir / "nash_report.txt", items)
    ok = certified and report.verified and agree == cfg.seeds
    return EXIT_OK if ok else EXIT_FAILED


# -- sweep --------------------------------------------------------------------

def _sweep_one(args):
    doc, key, value, out_dir = args
    cfg = parse_config(json.dumps(set_path(doc, key, value)))
    status = run(cfg, out_dir)
    rep = read_report(out_dir / "report.txt")
    return status, rep


def sweep(doc: dict, out_dir: Path, jobs: int = 1) -> int:
    """Run simulate for each value of ``doc["sweep"]["key"]``, one subdirectory per value."""
    spec = doc.get("sweep")
    if not isinstance(spec, dict) or set(spec) != {"key", "values"}:
        raise ConfigError("sweep", 'expected {"key": "dotted.path", "values": [...]}')
    key, values = spec["key"], spec["values"]
    if not isinstance(key, str) or key.startswith("sweep"):
        raise ConfigError("sweep.key", "expected a dotted config key")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values", "expected a non-empty list")
    base = {k: v for k, v in doc.items() if k != "sweep"}
    leaf = key.rsplit(".", 1)[-1]
    tasks = []
    for i, value in enumerate(values):
        # fail fast on bad values before any run starts
        parse_config(json.dumps(set_path(base, key, value)))
        tasks.append((base, key, value, out_dir / f"{i:03d}_{leaf}={_value(value)}"))
    out_dir.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    cols = ["rate_A", "r2_A", "final_A", "final_B", "final_D", "invariants_passed"]
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", key, "exit_status", "status"] + cols)
        for i, ((status, rep), value) in enumerate(zip(results, values)):
            w.writerow([i, _value(value), status, rep.get("status", "")] + [rep.get(c, "") for c in cols])
    return max(status for status, _ in results)


# -- verify -------------------------------------------------------------------

def verify(suite: str, out_dir: Optional[Path]) -> int:
    results = checks.run_suite(suite)
    lines = [c.line() for c in results]
    for line in lines:
        print(line)
    n_fail = sum(not c.passed for c in results)
    summary = f"{suite}: {len(results) - n_fail} passed, {n_fail} failed"
    print(summary)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"verify_{suite}.txt").write_text("\n".join(lines + [summary]) + "\n")
    return EXIT_OK if n_fail == 0 else EXIT_FAILED


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flockgame",
        description="Flocking with self-propulsion: simulations, diagnostics and opinion-game equilibria.",
        epilog=f"Relative output directories are placed under ${ENV_OUTPUT} (default: current directory). "
               "Exit status 0 = all invariants/checks pass, 1 = some fail, 2 = bad config, "
               "3 = integration or solver failure.")
    parser.add_argument("--output-root", metavar="DIR",
                        help=f"root for relative output directories (overrides ${ENV_OUTPUT})")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="run one simulation config",
                       description="Integrate a flock config; write series.csv and report.txt.")
    p.add_argument("config", help="JSON simulation config")
    p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir or the config stem)")

    p = sub.add_parser("nash", help="solve an opinion-game config",
                       description="Compute, certify and verify the game equilibrium; write nash_report.txt "
                                   "and sweep.csv.")
    p.add_argument("config", help="JSON game config")
    p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir or the config stem)")

    p = sub.add_parser("sweep", help="repeat a simulation over one config key",
                       description='Simulation config with an extra "sweep": {"key": ..., "values": [...]} '
                                   "section; each value runs in its own subdirectory.")
    p.add_argument("config", help="JSON simulation config with a sweep section")
    p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir or the config stem)")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel worker processes (default 1)")

    p = sub.add_parser("verify", help="run a verification suite",
                       description="Run a named verification suite and print one line per check.")
    p.add_argument("suite", choices=sorted(checks.SUITES) + ["all"], help="suite name")
    p.add_argument("--out", metavar="DIR", help="also write verify_<suite>.txt here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    root = output_root(args.output_root)
    try:
        if args.command == "verify":
            out = resolve_dir(root, args.out, ".") if args.out else None
            return verify(args.suite, out)
        path = Path(args.config)
        text = path.read_text()
        if args.command == "simulate":
            cfg = parse_config(text)
            return run(cfg, resolve_dir(root, args.out or cfg.output_dir, path.stem))
        if args.command == "nash":
            gcfg = parse_game_config(text)
            return nash_cmd(gcfg, resolve_dir(root, args.out or gcfg.output_dir, path.stem))
        doc = json.loads(text)
        configured = doc.get("output", {}).get("dir") if isinstance(doc.get("output"), dict) else None
        return sweep(doc, resolve_dir(root, args.out or configured, path.stem), args.jobs)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

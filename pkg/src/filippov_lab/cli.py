"""Command-line front end.

Subcommands: simulate, probe, return-map, verify-scaling, sweep.  Systems
come from a JSON config file (--config) or a named builtin (--builtin);
every run writes a manifest.json next to its outputs so results can be
reproduced from the recorded digest, seed, and tool version.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import __version__
from .catalog import BUILTIN_NAMES, DEFAULT_NU, get_builtin
from .errors import FilippovError
from .expressions import parse_field, pretty_print
from .integrate import (
    IntegratorConfig,
    integrate,
    reparameterize_time,
    verify_time_scaling,
    write_events_csv,
    write_trajectory_csv,
)
from .reduction import (
    ProbeConfig,
    linearize_at_origin,
    robustness_sweep,
    stability_probe,
    sweep_to_json,
    write_verdicts_json,
)
from .sphere import (
    _GRID_MARGIN,
    SectionConfig,
    find_fixed_points,
    iterate_return_map,
    scan_return_map,
    write_orbit_csv,
    write_return_map_csv,
    write_statistics_json,
)
from .systems import (
    AffineField,
    ExpressionField,
    PiecewiseSystem,
    ReducedSystem,
)

__all__ = ["main", "resolve_config", "system_to_config", "config_digest"]

AnySystem = Union[PiecewiseSystem, ReducedSystem]

DEFAULT_THETA0 = 2.5


class CliError(Exception):
    """Input or configuration problem; maps to exit code 1."""


# ------------------------------------------------------------ configuration


def _piece_from_config(spec, dimension: int, side: str):
    if not isinstance(spec, dict):
        raise CliError(f"{side} piece must be an object")
    if "affine" in spec and "expressions" in spec:
        raise CliError(f"{side} piece: give either 'affine' or 'expressions'")
    if "affine" in spec:
        aff = spec["affine"]
        try:
            return AffineField(np.array(aff["M"], dtype=float),
                               np.array(aff["b"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"bad affine {side} piece: {exc}") from exc
    if "expressions" in spec:
        texts = spec["expressions"]
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise CliError(f"{side} expressions must be a list of strings")
        return ExpressionField(parse_field(texts, dimension))
    raise CliError(f"{side} piece needs 'affine' or 'expressions'")


def system_from_config(cfg: dict) -> AnySystem:
    """Build a system from a parsed config dictionary."""
    if "builtin" in cfg:
        extra = set(cfg) - {"builtin", "nu"}
        if extra:
            raise CliError(f"unexpected keys with builtin: {sorted(extra)}")
        nu = cfg.get("nu", DEFAULT_NU)
        if not isinstance(nu, (int, float)) or nu <= 0:
            raise CliError("nu must be a positive number")
        try:
            return get_builtin(cfg["builtin"], float(nu))
        except KeyError as exc:
            raise CliError(str(exc.args[0])) from exc
    missing = {"dimension", "left", "right"} - set(cfg)
    if missing:
        raise CliError(f"config missing keys: {sorted(missing)}")
    dimension = cfg["dimension"]
    if not isinstance(dimension, int) or dimension < 2:
        raise CliError("dimension must be an integer >= 2")
    left = _piece_from_config(cfg["left"], dimension, "left")
    right = _piece_from_config(cfg["right"], dimension, "right")
    try:
        return PiecewiseSystem(dimension, left, right)
    except FilippovError as exc:
        raise CliError(str(exc)) from exc


def _piece_to_config(piece) -> dict:
    if isinstance(piece, AffineField):
        return {
            "affine": {
                "M": [[float(v) for v in row] for row in piece.matrix],
                "b": [float(v) for v in piece.offset],
            }
        }
    return {"expressions": pretty_print(piece.expression)}


def system_to_config(system: AnySystem) -> dict:
    """Explicit (builtin-free) config equivalent to the given system."""
    full = system.as_system() if isinstance(system, ReducedSystem) else system
    return {
        "dimension": full.dimension,
        "left": _piece_to_config(full.left),
        "right": _piece_to_config(full.right),
    }


def config_digest(explicit: dict) -> str:
    canonical = json.dumps(explicit, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def resolve_config(args) -> tuple[AnySystem, dict]:
    """System plus its explicit config from --builtin or --config."""
    if bool(args.builtin) == bool(args.config):
        raise CliError("give exactly one of --builtin or --config")
    if args.builtin:
        cfg = {"builtin": args.builtin}
    else:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        try:
            cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise CliError("config must be a JSON object")
    system = system_from_config(cfg)
    return system, system_to_config(system)


def _parse_x0(text: Optional[str], dimension: int) -> np.ndarray:
    if text is None:
        # second coordinate axis: on the surface, in the attracting
        # sliding region of the builtin systems
        x0 = np.zeros(dimension)
        x0[1] = 1.0
        return x0
    try:
        vals = [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise CliError(f"bad --x0 value: {exc}") from exc
    if len(vals) != dimension:
        raise CliError(f"--x0 has {len(vals)} entries, system dimension is {dimension}")
    return np.array(vals)


def _as_reduced(system: AnySystem) -> ReducedSystem:
    if isinstance(system, ReducedSystem):
        return system
    try:
        return linearize_at_origin(system)
    except FilippovError as exc:
        raise CliError(f"cannot reduce system: {exc}") from exc


# ---------------------------------------------------------------- manifest


def _write_manifest(out_dir: Path, command: str, digest: str,
                    seed: Optional[int], outputs: list[str], wall: float) -> None:
    payload = {
        "command": command,
        "config_digest": digest,
        "seed": seed,
        "tool_version": __version__,
        "outputs": sorted(outputs),
        "wall_time_s": wall,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _maybe_dump(args, explicit: dict) -> bool:
    if getattr(args, "dump_config", False):
        print(json.dumps(explicit, indent=2, sort_keys=True))
        return True
    return False


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    system, explicit = resolve_config(args)
    if _maybe_dump(args, explicit):
        return 0
    x0 = _parse_x0(args.x0, system.dimension)
    cfg = IntegratorConfig(t_max=args.t_max)
    t0 = time.perf_counter()
    traj = integrate(system, x0, cfg)
    out = _out_dir(args)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_events_csv(traj, out / "events.csv")
    _write_manifest(out, "simulate", config_digest(explicit), None,
                    ["trajectory.csv", "events.csv"], time.perf_counter() - t0)
    print(f"status: {traj.status}  final_time: {traj.final_time:.17g}  "
          f"events: {len(traj.events)}")
    if traj.status in ("Converged", "HorizonReached"):
        return 0
    if traj.status == "Escaped":
        return 2
    return 3


def cmd_probe(args) -> int:
    system, explicit = resolve_config(args)
    if _maybe_dump(args, explicit):
        return 0
    pc = ProbeConfig(seed=args.seed)
    t0 = time.perf_counter()
    verdicts = {}
    if isinstance(system, ReducedSystem):
        verdicts["reduced"] = stability_probe(system, pc)
    else:
        verdicts["full"] = stability_probe(system, pc)
        verdicts["reduced"] = stability_probe(_as_reduced(system), pc)
    out = _out_dir(args)
    write_verdicts_json(verdicts, out / "verdicts.json")
    _write_manifest(out, "probe", config_digest(explicit), args.seed,
                    ["verdicts.json"], time.perf_counter() - t0)
    for name, verdict in sorted(verdicts.items()):
        print(f"{name}: {verdict.kind}"
              + (f" ({verdict.reason})" if verdict.kind == "Inapplicable" else ""))
    return 0


def cmd_return_map(args) -> int:
    system, explicit = resolve_config(args)
    if _maybe_dump(args, explicit):
        return 0
    if args.grid < 2:
        raise CliError("--grid must be at least 2")
    if args.iterates < 1 or args.transient < 0:
        raise CliError("--iterates must be >= 1 and --transient >= 0")
    rs = _as_reduced(system)
    cfg = replace(SectionConfig(), transient=args.transient,
                  n_iterates=args.iterates)
    t0 = time.perf_counter()
    grid = np.linspace(cfg.theta_lo + _GRID_MARGIN, cfg.theta_hi - _GRID_MARGIN,
                       args.grid)
    rows = scan_return_map(rs, grid, cfg)
    n_ok = sum(1 for _, _, status in rows if status == "ok")
    stats = iterate_return_map(rs, DEFAULT_THETA0, cfg)
    fixed = find_fixed_points(rs, cfg, grid_n=args.grid)
    out = _out_dir(args)
    write_return_map_csv(rows, out / "return_map.csv")
    write_orbit_csv(stats, out / "orbit.csv")
    write_statistics_json(stats, fixed, out / "statistics.json")
    _write_manifest(out, "return-map", config_digest(explicit), None,
                    ["return_map.csv", "orbit.csv", "statistics.json"],
                    time.perf_counter() - t0)
    frac = n_ok / len(rows)
    print(f"grid: {n_ok}/{len(rows)} returned ({100 * frac:.1f}%)")
    print(f"lyapunov: {stats.lyapunov:.6f}  mean_D_arith: {stats.mean_D_arith:.6f}  "
          f"mean_D_geom: {stats.mean_D_geom:.6f}  valid: {stats.valid}")
    print(f"fixed points: {len(fixed)}")
    for theta_star, d_star in fixed:
        print(f"  theta* = {theta_star:.12f}  D = {d_star:.12f}")
    return 0 if frac >= 0.9 else 1


def cmd_verify_scaling(args) -> int:
    system, explicit = resolve_config(args)
    if _maybe_dump(args, explicit):
        return 0
    gamma = args.gamma
    if gamma is None:
        raise CliError("--gamma is required")
    if not 0.0 < gamma <= 1.0:
        print(f"gamma = {gamma!r} outside (0, 1]", file=sys.stderr)
        return 1
    x0 = _parse_x0(args.x0, system.dimension)
    t0 = time.perf_counter()
    deviation = verify_time_scaling(system, x0, gamma)
    # same step cap as the verification run, so the clock is sampled on
    # the trajectory actually compared
    icfg = replace(IntegratorConfig(), max_step=0.05)
    clock = reparameterize_time(integrate(system, x0, icfg), gamma)
    t = np.asarray(clock.times)
    p = np.asarray(clock.p_values)
    slack = 1e-9 * (1.0 + float(t[-1]))
    monotone = bool(np.all(np.diff(p) > 0.0))
    bounds = bool(np.all(p >= gamma * t - slack) and np.all(p <= t + slack))
    passed = deviation < 1e-5 and monotone and bounds
    out = _out_dir(args)
    payload = {
        "gamma": gamma,
        "max_deviation": deviation,
        "clock_monotone": monotone,
        "clock_bounds_hold": bounds,
        "t_final": float(t[-1]),
        "p_final": float(p[-1]),
        "passed": passed,
    }
    with open(out / "scaling.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "verify-scaling", config_digest(explicit), None,
                    ["scaling.json"], time.perf_counter() - t0)
    print(f"max deviation: {deviation:.3e} (bound 1e-5)")
    print(f"clock bounds gamma*t <= p(t) <= t: {'hold' if bounds else 'VIOLATED'}; "
          f"strictly increasing: {'yes' if monotone else 'NO'}")
    return 0 if passed else 1


def cmd_sweep(args) -> int:
    system, explicit = resolve_config(args)
    if _maybe_dump(args, explicit):
        return 0
    if args.delta is None:
        raise CliError("--delta is required")
    if args.trials < 1:
        raise CliError("--trials must be >= 1")
    rs = _as_reduced(system)
    pc = ProbeConfig(seed=args.seed)
    t0 = time.perf_counter()
    report = robustness_sweep(rs, args.delta, args.trials, pc)
    out = _out_dir(args)
    with open(out / "sweep.json", "w", encoding="utf-8") as fh:
        json.dump(sweep_to_json(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "sweep", config_digest(explicit), args.seed,
                    ["sweep.json"], time.perf_counter() - t0)
    print(f"stable_fraction: {report.stable_fraction}  "
          f"({args.trials} trials, delta = {args.delta})")
    return 0


# -------------------------------------------------------------- entry point


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON system config file")
    p.add_argument("--builtin", choices=BUILTIN_NAMES,
                   help="named built-in system")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--dump-config", action="store_true",
                   help="print the resolved explicit config and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="filippov-lab",
        description="Simulation and stability analysis of piecewise-smooth "
                    "systems with a planar switching surface",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    _add_common(p)
    p.add_argument("--x0", help="initial state as comma list (default: e2)")
    p.add_argument("--t-max", type=float, default=100.0, help="time horizon")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("probe", help="sampled stability verdicts")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("return-map",
                       help="section return map, orbit statistics, fixed points")
    _add_common(p)
    p.add_argument("--grid", type=int, default=512, help="scan grid size")
    p.add_argument("--iterates", type=int, default=1000,
                   help="post-transient orbit length")
    p.add_argument("--transient", type=int, default=100,
                   help="discarded leading iterates")
    p.set_defaults(fn=cmd_return_map)

    p = sub.add_parser("verify-scaling",
                       help="check the right-piece time reparameterization")
    _add_common(p)
    p.add_argument("--gamma", type=float, help="scaling factor in (0, 1]")
    p.add_argument("--x0", help="initial state as comma list (default: e2)")
    p.set_defaults(fn=cmd_verify_scaling)

    p = sub.add_parser("sweep", help="stability under random perturbations")
    _add_common(p)
    p.add_argument("--delta", type=float, help="perturbation radius")
    p.add_argument("--trials", type=int, default=20, help="number of draws")
    p.add_argument("--seed", type=int, default=0, help="perturbation seed")
    p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FilippovError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

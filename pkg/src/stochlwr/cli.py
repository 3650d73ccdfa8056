"""Command-line runner: every command writes CSV files into ``--out``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from ._io import write_csv
from .characteristics import build_surface, integrate_fan, stopping_times
from .closedform import CATALOG, IDS, closed_form_sigma, default_functional, evaluate_grid, lookup
from .exceptions import StochLWRError
from .model import NAMED_SCENARIOS, load_config, named_scenario, scenario_from_config
from .process import TimeGrid, sample_brownian, to_geometric, zero_path
from .verify import ConvergenceTable, check_entry

DEFAULTS = {"seed": 0, "dt": 1e-3, "nx": 101, "T": 1.0}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--nx", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--out", default=".")
    p.add_argument("--config")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stochlwr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate the characteristic fan and build the surface")
    _shared(p)
    p.add_argument("--scenario")
    p.add_argument("--fan-refine", type=int, default=1,
                   help="initial points per x-grid cell used for the fan")

    p = sub.add_parser("closed-form", help="evaluate a catalog solution on the grid")
    _shared(p)
    p.add_argument("--id", dest="id")

    p = sub.add_parser("verify", help="residual sweep and solver cross-check")
    _shared(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--id", dest="id")
    group.add_argument("--all", action="store_true")
    p.add_argument("--probes", type=int, default=1000)

    p = sub.add_parser("stopping-time", help="numerical and explicit sigma(x)")
    _shared(p)
    p.add_argument("--scenario")

    p = sub.add_parser("paths", help="dump a sampled driving path")
    _shared(p)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--kind", choices=("brownian", "geometric-brownian"), default="geometric-brownian")
    return parser


def resolve(args) -> dict:
    """Merge config-file values under the command-line flags and check ranges."""
    cfg = load_config(args.config) if args.config else {}
    run = dict(DEFAULTS)
    run.update({k: cfg[k] for k in DEFAULTS if k in cfg})
    run.update({k: getattr(args, k) for k in DEFAULTS if getattr(args, k) is not None})
    if not (math.isfinite(run["dt"]) and run["dt"] > 0):
        raise UsageError("dt must be positive")
    if run["nx"] < 2:
        raise UsageError("nx must be >= 2")
    if not (math.isfinite(run["T"]) and run["T"] > 0):
        raise UsageError("T must be positive and finite")
    run["config"] = cfg
    return run


def _scenario(args, run):
    if args.scenario:
        name = args.scenario.lower()
        if name not in NAMED_SCENARIOS:
            raise UsageError(f"unknown scenario {args.scenario!r}; choose from {', '.join(NAMED_SCENARIOS)}")
        return name, named_scenario(name, run["T"])
    if "ic" in run["config"]:
        cfg = dict(run["config"], T=run["T"])
        return None, scenario_from_config(cfg)
    raise UsageError("a scenario is required (--scenario or ic= in --config)")


def _path_for(scenario, grid, seed):
    if scenario.perturbation.id == "none":
        return zero_path(grid)
    w = sample_brownian(seed, grid)
    return to_geometric(w) if scenario.noise_kind == "geometric-brownian" else w


def _catalog_id(name):
    return name.upper() if name and name.upper() in CATALOG else None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args, run) -> int:
    _, scenario = _scenario(args, run)
    if args.fan_refine < 1:
        raise UsageError("fan-refine must be >= 1")
    grid = TimeGrid.uniform(run["T"], run["dt"])
    path = _path_for(scenario, grid, run["seed"])
    x = np.linspace(0.0, 1.0, run["nx"])
    fan = integrate_fan(scenario, path, np.linspace(0.0, 1.0, (run["nx"] - 1) * args.fan_refine + 1))
    surface = build_surface(fan, x)
    out = _out_dir(args)
    surface.to_csv(out / "surface.csv")
    fan.to_csv(out / "fan.csv")
    stopping_times(fan, x).to_csv(out / "sigma.csv")
    return 0


def cmd_closed_form(args, run) -> int:
    if not args.id:
        raise UsageError("--id is required")
    entry = lookup(args.id)
    grid = TimeGrid.uniform(run["T"], run["dt"])
    if entry.noise_kind == "zero":
        path = zero_path(grid)
    else:
        w = sample_brownian(run["seed"], grid)
        path = to_geometric(w) if entry.noise_kind == "geometric-brownian" else w
    functional = default_functional(entry, path)
    surface = evaluate_grid(entry, np.linspace(0.0, 1.0, run["nx"]), path, functional)
    out = _out_dir(args) / "closed_form.csv"
    if functional is None:
        surface.to_csv(out)
        return 0

    def rows():
        for k, t in enumerate(surface.t_grid):
            for j, x in enumerate(surface.x_grid):
                yield x, t, surface.u[j, k], bool(surface.valid[j, k]), functional.cumulative[k]

    write_csv(out, ("x", "t", "u", "valid", "I"), rows())
    return 0


def cmd_verify(args, run) -> int:
    if args.probes < 1:
        raise UsageError("probes must be >= 1")
    ids = IDS if args.all else (lookup(args.id).id,)
    out = _out_dir(args)
    rows = []
    failed = False
    for id in ids:
        report, cross = check_entry(id, seed=run["seed"], n_probes=args.probes, dt=run["dt"],
                                    nx=run["nx"], T=run["T"])
        report.to_csv(out / f"residuals_{id}.csv")
        ok = report.passed and cross.passed
        failed |= not ok
        print(f"{id},{report.max_residual:.3e},{'PASS' if ok else 'FAIL'}")
        if isinstance(cross, ConvergenceTable):
            rows.append((id, "convergence-ratio", min(cross.ratios), cross.min_ratio, cross.passed))
        else:
            rows.append((id, "cross-validation", cross.sup_error, cross.tolerance, cross.passed))
        if not cross.passed:
            print(f"{id}: {rows[-1][1]} {rows[-1][2]:.3e} outside tolerance {rows[-1][3]:g}", file=sys.stderr)
    write_csv(out / "cross_checks.csv", ("id", "check", "value", "tolerance", "pass"), rows)
    return 1 if failed else 0


def cmd_stopping_time(args, run) -> int:
    name, scenario = _scenario(args, run)
    grid = TimeGrid.uniform(run["T"], run["dt"])
    path = _path_for(scenario, grid, run["seed"])
    x = np.linspace(0.0, 1.0, run["nx"])
    fan = integrate_fan(scenario, path, x)
    numeric = stopping_times(fan, x).sigma
    cid = _catalog_id(name)
    formula = closed_form_sigma(cid, x, path) if cid else [None] * x.size
    write_csv(_out_dir(args) / "sigma.csv", ("x", "sigma_numeric", "sigma_formula"), zip(x, numeric, formula))
    return 0


def cmd_paths(args, run) -> int:
    grid = TimeGrid.uniform(run["T"], run["dt"])
    path = sample_brownian(run["seed"], grid, args.index)
    if args.kind == "geometric-brownian":
        path = to_geometric(path)
    path.to_csv(_out_dir(args) / "paths.csv")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "closed-form": cmd_closed_form,
    "verify": cmd_verify,
    "stopping-time": cmd_stopping_time,
    "paths": cmd_paths,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        run = resolve(args)
        return COMMANDS[args.command](args, run)
    except (UsageError, StochLWRError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"stochlwr: error: {msg}", file=sys.stderr)
        return 2

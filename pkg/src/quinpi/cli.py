"""Command-line driver: ``quinpi {run,converge,timing,newton-log}``.

Settings come from an optional JSON file (``--config``) and are overridden
by any flag given explicitly on the command line. Exit status is 0 on
success, 2 for configuration errors and 3 when the solver fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields, replace
from typing import Optional, Sequence

from .cweno import LinearWeights
from .experiments import (
    SCHEMES,
    ConfigError,
    RunConfig,
    convergence_study,
    newton_log,
    run,
    timing_study,
    write_convergence,
    write_diagnostics,
    write_newton_log,
    write_solution,
    write_timing,
)
from .core import FLUXES, INITIAL_CONDITIONS
from .irk import NewtonDivergenceError, SingularMatrixError
from .reference import CflViolationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

log = logging.getLogger("quinpi")

# flag dest -> RunConfig field
_FIELD_MAP = {
    "problem": "problem",
    "ic": "ic",
    "n": "n_cells",
    "nu": "nu",
    "cfl": "cfl",
    "tfinal": "t_final",
    "scheme": "scheme",
    "eps_t_exp": "eps_t_exponent",
    "x_min": "x_min",
    "x_max": "x_max",
}


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    # defaults are None so that only explicitly given flags override the config file
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--problem", choices=sorted(FLUXES))
    p.add_argument("--ic", choices=sorted(INITIAL_CONDITIONS))
    p.add_argument("--n", type=int, help="number of cells")
    dt = p.add_mutually_exclusive_group()
    dt.add_argument("--nu", type=float, help="mesh ratio dt/h")
    dt.add_argument("--cfl", type=float, help="dt = cfl * h / alpha0 from the initial state")
    p.add_argument("--tfinal", type=float)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--eps-t-exp", type=int, choices=(2, 3))
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--linear-weights", type=float, nargs=3, metavar=("C0", "CL", "CR"))
    p.add_argument("--no-conservative-correction", action="store_true", default=None)
    p.add_argument("--explicit-predictor", action="store_true", default=None)
    p.add_argument("--out", default=None, help="output directory (default: current)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quinpi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run; writes solution.csv and diag.csv")
    _common(p)

    p = sub.add_parser("converge", help="refinement study; writes table.csv")
    _common(p)
    p.add_argument("--n-list", type=_int_list, default=[64, 128, 256, 512, 1024])

    p = sub.add_parser("timing", help="explicit vs implicit per-step cost; writes table.csv")
    _common(p)
    p.add_argument("--n-list", type=_int_list, default=[200, 400, 800, 1600])
    p.add_argument("--steps", type=int, default=10)

    p = sub.add_parser("newton-log", help="Newton iterations per step; writes newton.csv")
    _common(p)
    return parser


def _load_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the JSON file and explicit flags (in increasing priority)."""
    data = _load_file(args.config)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known - {"out"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.pop("out", None)
    if "linear" in data:
        data["linear"] = LinearWeights(*data["linear"])
    cfg = RunConfig(**data)
    if args.cfl is not None or args.nu is not None:
        # the two time-step controls are exclusive; a flag replaces the file's choice
        cfg = replace(cfg, nu=args.nu, cfl=args.cfl)
    elif "cfl" in data and "nu" not in data:
        cfg = replace(cfg, nu=None)
    overrides = {_FIELD_MAP[k]: v for k, v in vars(args).items()
                 if k in _FIELD_MAP and k not in ("nu", "cfl") and v is not None}
    if args.linear_weights is not None:
        overrides["linear"] = LinearWeights(*args.linear_weights)
    if args.no_conservative_correction:
        overrides["conservative_correction"] = False
    if args.explicit_predictor:
        overrides["explicit_predictor"] = True
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _out_dir(args, config_path: Optional[str]) -> str:
    out = args.out
    if out is None and config_path:
        out = _load_file(config_path).get("out")
    out = out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _dispatch(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args, args.config)
    if args.command == "run":
        result = run(cfg)
        write_solution(os.path.join(out, "solution.csv"), result.final)
        write_diagnostics(os.path.join(out, "diag.csv"), result)
        print(f"{cfg.scheme}: {len(result.steps)} steps to t={result.final.time:.6g}, "
              f"max |mass deviation| {result.max_mass_deviation:.3e}")
    elif args.command == "converge":
        table = convergence_study(cfg, args.n_list)
        write_convergence(os.path.join(out, "table.csv"), table)
        for row in table.rows():
            print("N={:5d}  L1={:.3e} ({:.2f})  Linf={:.3e} ({:.2f})".format(*row))
    elif args.command == "timing":
        rows = timing_study(cfg.problem, cfg.ic, args.n_list, nu=cfg.nu or 5.0,
                            cfl=cfg.cfl or 0.45, steps=args.steps,
                            x_min=cfg.x_min, x_max=cfg.x_max)
        write_timing(os.path.join(out, "table.csv"), rows)
        for r in rows:
            print(f"N={r.n_cells:5d}  explicit={r.explicit_seconds:.3e}s  "
                  f"implicit={r.implicit_seconds:.3e}s  ratio={r.ratio:.2f}")
    elif args.command == "newton-log":
        result = newton_log(cfg)
        write_newton_log(os.path.join(out, "newton.csv"), result)
        worst = max((max(s.newton_iterations, default=0) for s in result.steps), default=0)
        print(f"{len(result.steps)} steps, at most {worst} iterations per solve")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (NewtonDivergenceError, SingularMatrixError, CflViolationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver.

Examples::

    fracvar solve --problem classical_limit --set gamma=1 --set lambda=1 --n 1000 --out run1
    fracvar convergence --config cfg.json --grids 50,100,200 --out study

Exit codes: 0 converged, 1 configuration error, 2 solver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, FracVarError
from .problem import BoundarySpec, Fixed, Free, Problem, builtin_problem, classical_reference
from .solver import SolveOptions, solve_direct

__all__ = ["RunConfig", "ConfigError", "load_config", "run_solve", "run_convergence", "main"]

logger = logging.getLogger("fracvar")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2

_RESERVED = {"problem", "problem_name", "params", "n", "seed", "output_dir", "out",
             "boundary", "left", "right", "solver", "reference", "grids"}
_SOLVER_FIELDS = {f.name for f in dataclasses.fields(SolveOptions)} - {"seed"}


@dataclass
class RunConfig:
    problem_name: str
    params: Dict[str, float] = field(default_factory=dict)
    n: Optional[int] = None
    boundary: Dict[str, Any] = field(default_factory=dict)
    solver: Dict[str, Any] = field(default_factory=dict)
    output_dir: str = "."
    seed: int = 0
    reference: Optional[str] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "problem": self.problem_name,
            "params": dict(sorted(self.params.items())),
            "n": self.n,
            "boundary": dict(sorted(self.boundary.items())),
            "solver": dict(sorted(self.solver.items())),
            "seed": self.seed,
            "reference": self.reference,
        }


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(data: Dict[str, Any]) -> RunConfig:
    """Build a :class:`RunConfig` from a flat mapping.

    Numeric keys other than the reserved ones are problem parameters;
    a nested ``params`` object is merged in as well.
    """
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")

    name = data.get("problem", data.get("problem_name"))
    if not isinstance(name, str) or not name:
        raise ConfigError("configuration does not name a problem")

    params: Dict[str, Any] = {}
    nested = data.get("params") or {}
    if not isinstance(nested, dict):
        raise ConfigError("'params' must be an object")
    params.update(nested)
    params.update({k: v for k, v in data.items() if k not in _RESERVED})
    for key, value in params.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"parameter {key!r} must be a number, got {value!r}")

    boundary = dict(data.get("boundary") or {})
    for side in ("left", "right"):
        if side in data:
            boundary[side] = data[side]
    for side, value in boundary.items():
        if side not in ("left", "right"):
            raise ConfigError(f"unknown boundary side {side!r}")
        if value != "free" and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"boundary {side!r} must be 'free' or a number, got {value!r}")

    solver = dict(data.get("solver") or {})
    unknown = set(solver) - _SOLVER_FIELDS
    if unknown:
        raise ConfigError(f"unknown solver options: {', '.join(sorted(unknown))}")

    n = data.get("n")
    if n is not None and (isinstance(n, bool) or not isinstance(n, int) or n < 2):
        raise ConfigError(f"'n' must be an integer >= 2, got {n!r}")

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"'seed' must be an integer, got {seed!r}")

    reference = data.get("reference")
    if reference not in (None, "classical"):
        raise ConfigError(f"unknown reference {reference!r}; only 'classical' is available")

    return RunConfig(
        problem_name=name,
        params=params,
        n=n,
        boundary=boundary,
        solver=solver,
        output_dir=str(data.get("output_dir", data.get("out", "."))),
        seed=seed,
        reference=reference,
    )


def _problem(config: RunConfig, n: Optional[int] = None) -> Problem:
    n = config.n if n is None else n
    if n is None:
        raise ConfigError("grid size 'n' is missing")
    try:
        p = builtin_problem(config.problem_name, {**config.params, "n": n})
    except FracVarError as exc:
        raise ConfigError(str(exc)) from exc

    if config.boundary:
        def end(side, current):
            if side not in config.boundary:
                return current
            value = config.boundary[side]
            return Free() if value == "free" else Fixed(float(value))

        p = dataclasses.replace(p, boundary=BoundarySpec(
            end("left", p.boundary.left), end("right", p.boundary.right)))

    if config.reference == "classical" and not {"gamma", "lambda"} <= set(p.params):
        raise ConfigError("the classical reference needs 'gamma' and 'lambda'")
    return p


def _options(config: RunConfig) -> SolveOptions:
    try:
        return SolveOptions(seed=config.seed, **config.solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver options: {exc}") from exc


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"{value:.17g}"


def _json_number(value: Optional[float]):
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def run_solve(config: RunConfig) -> int:
    """Solve one problem and write ``solution.csv`` and ``report.json``."""
    try:
        p = _problem(config)
        opts = _options(config)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG

    report = solve_direct(p, opts)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    r = report.residuals.el_pointwise
    admissible = report.residuals.admissible
    with open(out / "solution.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["x", "y", "el_residual"])
        for x, y, res, ok in zip(p.grid.nodes, report.minimizer.values, r.values, admissible):
            writer.writerow([_fmt(x), _fmt(y), _fmt(res) if ok else ""])

    payload = {
        "j_value": _json_number(report.j_value),
        "grad_norm": _json_number(report.grad_norm),
        "el_norm": _json_number(report.el_residual_norm),
        "nbc_left": _json_number(report.nbc_left_residual),
        "nbc_right": _json_number(report.nbc_right_residual),
        "iterations": report.iterations,
        "converged": report.converged,
        "message": report.message,
        "config": config.to_json(),
        "version": __version__,
    }
    with open(out / "report.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")

    if not report.converged:
        logger.warning("solver did not converge: %s", report.message)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def run_convergence(config: RunConfig, grid_sizes: Sequence[int]) -> int:
    """One solve per grid size; writes ``convergence.csv``."""
    try:
        if not grid_sizes:
            raise ConfigError("no grid sizes given")
        sizes = sorted(int(n) for n in grid_sizes)
        if any(n < 2 for n in sizes):
            raise ConfigError(f"grid sizes must be >= 2, got {sizes}")
        problems = [_problem(config, n) for n in sizes]
        opts = _options(config)
    except (ConfigError, ValueError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG

    rows = []
    all_converged = True
    for p in problems:
        report = solve_direct(p, opts)
        all_converged &= report.converged
        dev = None
        if config.reference == "classical":
            ybar = classical_reference(p.params["gamma"], p.params["lambda"], p.grid.a, p.grid.b)
            dev = float(np.max(np.abs(report.minimizer.values - ybar(p.grid.nodes))))
        rows.append([p.grid.n, report.j_value, report.el_residual_norm,
                     report.nbc_left_residual, report.nbc_right_residual, dev])
        if not report.converged:
            logger.warning("n=%d did not converge: %s", p.grid.n, report.message)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "convergence.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["n", "j_value", "el_norm", "nbc_left", "nbc_right",
                         "max_dev_from_reference"])
        for n, *values in rows:
            writer.writerow([n, *(_fmt(v) for v in values)])

    return EXIT_OK if all_converged else EXIT_NOT_CONVERGED


# {{{ argument parsing


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat JSON configuration file")
    common.add_argument("--problem", metavar="NAME", help="registry problem name")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        help="override a configuration value (repeatable)")
    common.add_argument("--n", type=int, help="number of grid intervals")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="seed of the initial-guess perturbation")
    common.add_argument("--reference", choices=["classical"],
                        help="analytic reference for deviations (convergence mode)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fracvar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one problem")
    conv = sub.add_parser("convergence", parents=[common], help="grid refinement study")
    conv.add_argument("--grids", metavar="N1,N2,...", required=True,
                      help="comma-separated grid sizes")
    return parser


def _merge(args: argparse.Namespace) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")

    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        if key.startswith("solver."):
            data.setdefault("solver", {})[key[len("solver."):]] = _parse_value(value)
        else:
            data[key] = _parse_value(value)

    for key, value in (("problem", args.problem), ("n", args.n), ("out", args.out),
                       ("seed", args.seed), ("reference", args.reference)):
        if value is not None:
            data[key] = value
            if key == "out":
                data.pop("output_dir", None)
    return data


def _grids(text: str) -> List[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"--grids expects comma-separated integers, got {text!r}") from None


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(stream=sys.stderr, format="%(levelname)s: %(message)s",
                        level=logging.DEBUG if args.verbose else logging.INFO)

    try:
        config = load_config(_merge(args))
        grid_sizes = _grids(args.grids) if args.command == "convergence" else None
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG

    if args.command == "convergence":
        return run_convergence(config, grid_sizes)
    return run_solve(config)


# }}}


if __name__ == "__main__":
    sys.exit(main())

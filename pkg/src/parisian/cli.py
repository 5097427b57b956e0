"""Command line front end: ``parisian <command> <config> [--out PATH] [--seed N] [--workers N]``.

Exit codes: 0 success, 1 computation failure, 2 configuration error,
3 ``compare`` found a z-score of at least 3.29 in absolute value.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .analytics import ParisianProblem
from .config import RunConfig, load_config, to_jsonable
from .errors import ConfigError, ParisianError
from .simulation import SimConfig, simulate_joint_lt, simulate_ruin

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_CONFIG = 2
EXIT_COMPARE = 3

Z_FAIL = 3.29
Z_PASS = 3.0

COLUMNS = ["task", "u", "b", "v", "w", "value", "stderr", "route", "config_hash", "seed"]
COMPARE_COLUMNS = COLUMNS + ["analytic", "z", "passed"]
SCALE_COLUMNS = ["x", "q", "W", "Wq", "laplace_residual", "route", "config_hash"]

COMMANDS = ("scale", "ruin-prob", "laplace", "simulate", "compare")


def _problem(cfg: RunConfig) -> ParisianProblem:
    return ParisianProblem(cfg.model, cfg.kernel, cfg.quadrature)


def _route_arg(cfg: RunConfig):
    route = cfg.task["route"]
    return None if route == "auto" else route


def _b_for(cfg: RunConfig, problem: ParisianProblem):
    b = cfg.task["b"]
    return problem.default_b() if b is None else float(b)


# -- commands ---------------------------------------------------------------------


def cmd_scale(cfg: RunConfig, seed: int, workers) -> tuple[list[str], list[dict]]:
    problem = _problem(cfg)
    ev = problem.scale
    rows = []
    for q in cfg.task["q"]:
        phi = cfg.model.phi_inverse(q)
        residual = max(
            abs(ev.wq_laplace(q, phi + off) - 1.0 / (float(cfg.model.cumulant(phi + off)) - q))
            for off in cfg.task["beta_offsets"]
        )
        for x in cfg.task["x_grid"]:
            rows.append({
                "x": x,
                "q": q,
                "W": ev.w_scale(x),
                "Wq": ev.wq_scale(q, x),
                "laplace_residual": residual,
                "route": ev.backend_name,
                "config_hash": cfg.config_hash,
            })
    return SCALE_COLUMNS, rows


def _record(task, u, b, v, w, value, stderr, route, cfg, seed):
    return {
        "task": task, "u": u, "b": b, "v": v, "w": w, "value": value, "stderr": stderr,
        "route": route, "config_hash": cfg.config_hash, "seed": seed,
    }


def cmd_ruin_prob(cfg: RunConfig, seed: int, workers) -> tuple[list[str], list[dict]]:
    problem = _problem(cfg)
    route = _route_arg(cfg)
    label = problem.resolve_route(route)
    rows = [
        _record("ruin-prob", u, None, None, None, float(problem.ruin_prob(u, route)), None, label, cfg, None)
        for u in cfg.task["u"]
    ]
    return COLUMNS, rows


def cmd_laplace(cfg: RunConfig, seed: int, workers) -> tuple[list[str], list[dict]]:
    problem = _problem(cfg)
    route = _route_arg(cfg)
    label = problem.resolve_route(route)
    b = _b_for(cfg, problem)
    v, w = cfg.task["v"], cfg.task["w"]
    rows = []
    for u in cfg.task["u"]:
        if u > b:
            raise ConfigError(f"task/u: u={u} exceeds b={b}")
        rows.append(_record("laplace", u, b, v, w, problem.joint_lt(u, v, w, b, route), None, label, cfg, None))
    return COLUMNS, rows


def _simulate_rows(cfg: RunConfig, seed: int, workers, problem: ParisianProblem):
    sim = dict(cfg.sim)
    sim.pop("seed", None)
    sim_workers = sim.pop("workers", None)
    target = cfg.task["target"]
    out = []
    for u in cfg.task["u"]:
        if target == "laplace":
            b = _b_for(cfg, problem)
            v, w = cfg.task["v"], cfg.task["w"]
        else:
            b, v, w = cfg.task["b"], 0.0, 0.0
        sc = SimConfig(u=u, seed=seed, b=b, v=v, w=w, workers=workers or sim_workers, **sim)
        est = simulate_joint_lt(cfg.model, cfg.kernel, sc) if target == "laplace" else simulate_ruin(cfg.model, cfg.kernel, sc)
        out.append((u, b, v, w, est))
    return target, out


def cmd_simulate(cfg: RunConfig, seed: int, workers) -> tuple[list[str], list[dict]]:
    problem = _problem(cfg)
    target, results = _simulate_rows(cfg, seed, workers, problem)
    rows = [
        _record(f"simulate-{target}", u, b, v if target == "laplace" else None, w if target == "laplace" else None,
                est.value, est.stderr, "monte-carlo", cfg, seed)
        for u, b, v, w, est in results
    ]
    return COLUMNS, rows


def cmd_compare(cfg: RunConfig, seed: int, workers) -> tuple[list[str], list[dict]]:
    problem = _problem(cfg)
    route = _route_arg(cfg)
    label = problem.resolve_route(route)
    target, results = _simulate_rows(cfg, seed, workers, problem)
    rows = []
    for u, b, v, w, est in results:
        if target == "laplace":
            analytic = problem.joint_lt(u, v, w, b, route)
        elif b is None:
            analytic = float(problem.ruin_prob(u, route))
        else:
            analytic = problem.joint_lt(u, 0.0, 0.0, b, route)
        z = (est.value - analytic) / est.stderr if est.stderr > 0 else (0.0 if est.value == analytic else math.inf)
        row = _record(f"compare-{target}", u, b, v if target == "laplace" else None, w if target == "laplace" else None,
                      est.value, est.stderr, f"monte-carlo-vs-{label}", cfg, seed)
        row.update({"analytic": analytic, "z": z, "passed": abs(z) < Z_PASS})
        rows.append(row)
    return COMPARE_COLUMNS, rows


HANDLERS = {
    "scale": cmd_scale,
    "ruin-prob": cmd_ruin_prob,
    "laplace": cmd_laplace,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


# -- output ------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render(fmt: str, command: str, columns: list[str], rows: list[dict], cfg: RunConfig, seed) -> str:
    if fmt == "json":
        doc = {
            "provenance": {
                "tool": "parisian",
                "version": __version__,
                "command": command,
                "config_hash": cfg.config_hash,
                "seed": seed,
                "tolerances": {
                    "abs_tol": cfg.quadrature.abs_tol,
                    "rel_tol": cfg.quadrature.rel_tol,
                    "max_subdivisions": cfg.quadrature.max_subdivisions,
                    "truncation_mass": cfg.quadrature.truncation_mass,
                    "bias_tol": cfg.sim.get("bias_tol", SimConfig.bias_tol),
                },
                "columns": columns,
            },
            "records": [{k: to_jsonable(row.get(k)) for k in columns} for row in rows],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(k)) for k in columns])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parisian",
        description="Parisian ruin with deficit-dependent delays: analytic values and Monte Carlo checks.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", help="path to a JSON run configuration")
    parser.add_argument("--out", help="output file (.csv or .json); stdout when omitted")
    parser.add_argument("--seed", type=int, help="Monte Carlo seed, overrides sim.seed")
    parser.add_argument("--workers", type=int, help="Monte Carlo threads; results do not depend on it")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.sim.get("seed", 0))
        if not (0 <= seed < 2**64):
            raise ConfigError(f"--seed must fit in 64 unsigned bits, got {seed}")
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be positive")
        out_path = args.out or cfg.output.get("path")
        fmt = cfg.output.get("format")
        if args.out and not fmt:
            fmt = "json" if args.out.lower().endswith(".json") else "csv"
        fmt = fmt or "csv"
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        columns, rows = HANDLERS[args.command](cfg, seed, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParisianError, ArithmeticError, ValueError) as exc:
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    uses_seed = args.command in ("simulate", "compare")
    text = render(fmt, args.command, columns, rows, cfg, seed if uses_seed else None)
    if out_path:
        write_atomic(Path(out_path), text)
    else:
        sys.stdout.write(text)
    if args.command == "compare" and any(abs(r["z"]) >= Z_FAIL for r in rows):
        return EXIT_COMPARE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())

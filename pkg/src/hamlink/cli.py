"""Command-line entry point: ``hamlink {check,solve,sweep,validate}``.

Exit codes: 0 success, 1 usage or configuration error, 2 hypothesis failure,
3 solver non-convergence, 4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HamlinkError, HyperbolicityError
from .functional import make_context
from .hypotheses import AuditConfig, audit
from .problem import load_problem
from .solver import GeometryConfig, SolverConfig, solve
from .spectral import make_grid, read_trajectory_csv, write_trajectory_csv
from .validate import soliton, validate

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_NONCONVERGED, EXIT_VALIDATION = 0, 1, 2, 3, 4
ADMISSIBLE_TOL = 1e-8

logger = logging.getLogger("hamlink")


@dataclass
class RunConfig:
    problem: Path
    T: int = 20
    M: int = 512
    seed: int = 0
    threads: int = 1
    out_dir: Path = Path(".")
    solver: SolverConfig = field(default_factory=SolverConfig)
    geometry: GeometryConfig | None = field(default_factory=GeometryConfig)
    audit: AuditConfig = field(default_factory=AuditConfig)
    lambdas: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "problem": str(self.problem),
            "grid": {"T": self.T, "M": self.M},
            "seed": self.seed,
            "threads": self.threads,
            "solver": asdict(self.solver),
            "geometry": None if self.geometry is None else asdict(self.geometry),
        }


def parse_grid(text: str) -> tuple[int, int]:
    """``"T=20,M=512"`` -> ``(20, 512)``."""
    vals = {}
    try:
        for part in text.split(","):
            key, val = part.split("=")
            vals[key.strip().upper()] = int(val)
        return vals["T"], vals["M"]
    except (ValueError, KeyError) as exc:
        raise argparse.ArgumentTypeError(f"grid must look like 'T=20,M=512', got {text!r}") from exc


def parse_lambdas(text: str) -> list[float]:
    """Comma list ``"0,0.01"`` or range ``"start:stop:num"`` (inclusive)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        a, b, n = text.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(n))]
    return [float(x) for x in text.split(",") if x.strip()]


def _resolve_threads(cli_value: int) -> int:
    env = os.environ.get("HAMLINK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer HAMLINK_THREADS=%r", env)
    return max(1, cli_value)


def _finite(obj):
    """Replace non-finite floats by None so reports are strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_finite(doc), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _num(x) -> str:
    return repr(float(x))


def _out(cfg: RunConfig, name: str | None, default: str) -> Path:
    p = Path(name) if name else Path(default)
    return p if p.is_absolute() else cfg.out_dir / p


# --- subcommands -----------------------------------------------------------------


def cmd_check(cfg: RunConfig, out: str | None = None) -> int:
    problem = load_problem(cfg.problem)
    report = audit(problem, cfg.audit)
    write_json(_out(cfg, out, "report.json"), report.to_dict())
    for name in report.failures:
        logger.info("failure: %s", name)
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def _solve_once(cfg: RunConfig, problem, warm=None):
    ctx = make_context(problem, make_grid(cfg.T, cfg.M, problem.dim))
    result = solve(ctx, cfg.solver, cfg.geometry, warm_start=warm, threads=cfg.threads)
    return ctx, result


def _validation(problem, result, oracle: bool):
    geo = result.geometry
    certified = geo is not None and geo.valid
    report = validate(
        problem, result.orbit,
        analytic=soliton if oracle else None,
        level=result.level if geo is not None else None,
        inf_sphere=(geo.inf_sphere if certified else -math.inf) if geo is not None else None,
    )
    return report


def cmd_solve(cfg: RunConfig, out: str | None = None, report: str | None = None,
              validation: str | None = None, oracle: bool = False) -> int:
    problem = load_problem(cfg.problem)
    _, result = _solve_once(cfg, problem)
    orbit_path = _out(cfg, out, "orbit.csv")
    orbit_path.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(orbit_path, result.orbit)
    doc = result.to_dict()
    doc["config"] = cfg.to_dict()
    write_json(_out(cfg, report, "solve.json"), doc)
    if not result.converged:
        logger.info("solver did not converge: cerami %.3e", result.cerami)
        return EXIT_NONCONVERGED
    val = _validation(problem, result, oracle)
    write_json(_out(cfg, validation, "validation.json"), val.to_dict())
    if oracle and val.oracle_error is not None and val.oracle_error > 1e-3:
        return EXIT_VALIDATION
    return EXIT_OK if val.passed else EXIT_VALIDATION


SWEEP_FIELDS = ["lambda", "converged", "action", "residual", "triple_norm", "cerami", "delta", "admissible",
                "monotone", "note"]


def cmd_sweep(cfg: RunConfig, out: str | None = None) -> int:
    if not cfg.lambdas:
        logger.error("empty lambda list")
        return EXIT_USAGE
    base = load_problem(cfg.problem)
    threshold = audit(base.with_lambda(0.0), cfg.audit).lambda_threshold_step2
    rows = []
    warm = None
    prev = None
    for lam in cfg.lambdas:
        problem = base.with_lambda(lam)
        _, result = _solve_once(cfg, problem, warm)
        val = validate(problem, result.orbit)
        admissible = lam < threshold - ADMISSIBLE_TOL * max(1.0, threshold)
        monotone = True
        if prev is not None and lam != prev[0]:
            # the lambda term is nonnegative, so levels cannot drop as lambda grows
            monotone = (result.action - prev[1]) * math.copysign(1.0, lam - prev[0]) >= -1e-8
        notes = []
        if not admissible:
            notes.append("outside admissible region")
        notes += result.flags
        delta = result.geometry.delta if result.geometry is not None else float("nan")
        rows.append({
            "lambda": _num(lam), "converged": int(result.converged), "action": _num(result.action),
            "residual": _num(val.residual_l2), "triple_norm": _num(result.triple), "cerami": _num(result.cerami),
            "delta": _num(delta), "admissible": int(admissible), "monotone": int(monotone),
            "note": "; ".join(notes),
        })
        if result.converged:
            warm, prev = result, (lam, result.action)
    path = _out(cfg, out, "sweep.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


def cmd_validate(cfg: RunConfig, orbit: str, out: str | None = None, oracle: bool = False) -> int:
    problem = load_problem(cfg.problem)
    grid, coeffs = read_trajectory_csv(orbit)
    if grid.dim != problem.dim:
        raise HamlinkError(f"orbit dimension {grid.dim} does not match problem dimension {problem.dim}")
    ctx = make_context(problem, grid)
    state = ctx.symbol.split(coeffs, check=False)
    rep = validate(problem, state, analytic=soliton if oracle else None)
    write_json(_out(cfg, out, "validation.json"), rep.to_dict())
    ok = rep.passed and (rep.oracle_error is None or rep.oracle_error <= 1e-3)
    return EXIT_OK if ok else EXIT_VALIDATION


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, type=Path, help="problem JSON document")
    common.add_argument("--grid", type=parse_grid, default=(20, 512), help="window and modes, e.g. T=20,M=512")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker threads (HAMLINK_THREADS overrides)")
    common.add_argument("--out-dir", type=Path, default=Path("."))
    common.add_argument("-v", "--verbose", action="store_true")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol-cerami", type=float, default=SolverConfig.tol_cerami)
    solver.add_argument("--inner-tol", type=float, default=SolverConfig.inner_tol)
    solver.add_argument("--max-inner", type=int, default=SolverConfig.max_inner)
    solver.add_argument("--max-outer", type=int, default=SolverConfig.max_outer)
    solver.add_argument("--restarts", type=int, default=SolverConfig.restarts)
    solver.add_argument("--amplitude", type=float, default=SolverConfig.amplitude)
    solver.add_argument("--no-geometry", action="store_true", help="skip the linking-geometry certificate")

    audit_p = argparse.ArgumentParser(add_help=False)
    audit_p.add_argument("--n-dirs", type=int, default=AuditConfig.n_dirs)
    audit_p.add_argument("--n-radii", type=int, default=AuditConfig.n_radii)

    parser = argparse.ArgumentParser(prog="hamlink", description="Homoclinic orbits by linking minimax.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common, audit_p], help="audit the hypotheses")
    p.add_argument("--out", help="report path (default report.json)")

    p = sub.add_parser("solve", parents=[common, solver, audit_p], help="compute and validate an orbit")
    p.add_argument("--out", help="orbit CSV path (default orbit.csv)")
    p.add_argument("--report", help="solve report path (default solve.json)")
    p.add_argument("--validation", help="validation report path (default validation.json)")
    p.add_argument("--oracle", choices=["none", "soliton"], default="none")

    p = sub.add_parser("sweep", parents=[common, solver, audit_p], help="continuation in lambda")
    p.add_argument("--lambdas", required=True, type=parse_lambdas, help="'0,0.01,0.02' or 'start:stop:num'")
    p.add_argument("--out", help="sweep CSV path (default sweep.csv)")

    p = sub.add_parser("validate", parents=[common], help="validate a stored orbit")
    p.add_argument("--orbit", required=True, help="orbit CSV written by solve")
    p.add_argument("--out", help="validation report path (default validation.json)")
    p.add_argument("--oracle", choices=["none", "soliton"], default="none")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    T, M = args.grid
    seed = args.seed
    cfg = RunConfig(problem=args.problem, T=T, M=M, seed=seed, threads=_resolve_threads(args.threads),
                    out_dir=args.out_dir)
    cfg.audit = replace(cfg.audit, seed=seed, **{k: getattr(args, a) for k, a in
                                                 (("n_dirs", "n_dirs"), ("n_radii", "n_radii"))
                                                 if hasattr(args, a)})
    if hasattr(args, "tol_cerami"):
        cfg.solver = SolverConfig(tol_cerami=args.tol_cerami, inner_tol=args.inner_tol, max_inner=args.max_inner,
                                  max_outer=args.max_outer, restarts=args.restarts, amplitude=args.amplitude,
                                  seed=seed)
        cfg.geometry = None if args.no_geometry else GeometryConfig(seed=seed)
    if hasattr(args, "lambdas"):
        cfg.lambdas = args.lambdas
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "check":
            return cmd_check(cfg, args.out)
        if args.command == "solve":
            return cmd_solve(cfg, args.out, args.report, args.validation, args.oracle == "soliton")
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out)
        return cmd_validate(cfg, args.orbit, args.out, args.oracle == "soliton")
    except HyperbolicityError as exc:
        print(f"hamlink: hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (HamlinkError, ValueError, OSError) as exc:
        print(f"hamlink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

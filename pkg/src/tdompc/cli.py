"""Command-line front end.

Three subcommands: ``certify`` (closed-form small-gain verdict),
``simulate`` (closed-loop run with a shrink test) and ``sweep``
(certificate tables over an ell / R-scale / horizon grid).  Exit codes:
0 certified / stable, 2 not certified / shrink test failed, 1 on any
usage or numerical error.

Problems come from a built-in benchmark (``--bench jones|pendulum``) or
a JSON file (``--problem``) with fields ``A, B, Q, R, N, box_lower,
box_upper, x0`` (matrices as row-major nested arrays, optional ``P``).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bench, config
from .certify import CSV_FIELDS, SolverKind, certify, format_sig12
from .ocp import OcpSpec, PlantModel
from .sim import StabilityTest, empirical_min_iterations, simulate_tdo

_AXES = ("ell", "rscale", "horizon")
_EMPIRICAL_CAP = 100_000


class UsageError(ValueError):
    """Bad flags or config; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Everything one subcommand invocation needs."""

    command: str
    bench_name: str | None = None
    problem_path: str | None = None
    solver: SolverKind = SolverKind.PGM
    ell: int | None = None
    precondition: bool = False
    horizon: int | None = None
    rscale: float | None = None
    axis: str = "none"
    grid: tuple = ()
    out: str | None = None
    json_out: str | None = None
    steps: int = 400
    shrink_tol: float = 1e-4
    track_errors: bool = True
    empirical: bool = False
    ell_max: int = _EMPIRICAL_CAP
    jobs: int = 1
    tol: float | None = None

    def __post_init__(self):
        if (self.bench_name is None) == (self.problem_path is None):
            raise UsageError("exactly one of --bench or --problem is required")
        if self.axis not in _AXES + ("none",):
            raise UsageError(f"sweep axis must be one of {_AXES}")


def parse_grid(text: str, axis: str):
    """Grid mini-language: ``a:b`` (inclusive integers) or
    ``logspace(lo,hi,count)`` (base-10)."""
    text = text.strip()
    if text.startswith("logspace(") and text.endswith(")"):
        parts = text[len("logspace("):-1].split(",")
        if len(parts) != 3:
            raise UsageError("logspace takes exactly (lo, hi, count)")
        try:
            lo, hi = float(parts[0]), float(parts[1])
            count = int(parts[2])
        except ValueError as exc:
            raise UsageError(f"bad logspace arguments: {exc}") from exc
        if count < 1:
            raise UsageError("logspace count must be >= 1")
        values = [float(v) for v in np.logspace(lo, hi, count)]
    elif ":" in text:
        first, _, last = text.partition(":")
        try:
            start, stop = int(first), int(last)
        except ValueError as exc:
            raise UsageError(f"bad integer range {text!r}") from exc
        if stop < start:
            raise UsageError(f"empty range {text!r}")
        values = list(range(start, stop + 1))
    else:
        raise UsageError(
            f"grid {text!r} is neither 'a:b' nor 'logspace(lo,hi,count)'")

    if axis in ("ell", "horizon"):
        ints = []
        for v in values:
            if float(v) != int(v) or int(v) < 1:
                raise UsageError(
                    f"{axis} grid values must be integers >= 1, got {v}")
            ints.append(int(v))
        return ints
    return [float(v) for v in values]


def load_problem(path: str):
    """Read a problem JSON file -> (plant, spec, x0)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    required = ("A", "B", "Q", "R", "N", "box_lower", "box_upper", "x0")
    missing = [key for key in required if key not in doc]
    if missing:
        raise UsageError(f"problem file is missing fields: {missing}")
    plant = PlantModel(np.array(doc["A"], dtype=float),
                       np.array(doc["B"], dtype=float))
    spec = OcpSpec(q=np.array(doc["Q"], dtype=float),
                   r=np.array(doc["R"], dtype=float),
                   horizon=int(doc["N"]),
                   u_lower=np.array(doc["box_lower"], dtype=float),
                   u_upper=np.array(doc["box_upper"], dtype=float),
                   p=np.array(doc["P"], dtype=float) if "P" in doc else None)
    x0 = np.array(doc["x0"], dtype=float)
    if x0.shape != (plant.n,):
        raise UsageError(f"x0 must have length {plant.n}")
    return plant, spec, x0


def serialize_problem(plant: PlantModel, spec: OcpSpec, x0) -> dict:
    """Inverse of :func:`load_problem` (exact float round-trip)."""
    doc = {
        "A": plant.a.tolist(), "B": plant.b.tolist(),
        "Q": spec.q.tolist(), "R": spec.r.tolist(), "N": spec.horizon,
        "box_lower": spec.u_lower.tolist(),
        "box_upper": spec.u_upper.tolist(),
        "x0": np.asarray(x0, dtype=float).tolist(),
    }
    if spec.p is not None:
        doc["P"] = spec.p.tolist()
    return doc


def _resolve(cfg: RunConfig):
    """Problem source + overrides -> (plant, spec, x0, default_ell)."""
    if cfg.bench_name is not None:
        case = bench.by_name(cfg.bench_name)
        plant, spec, x0 = case.plant, case.spec, case.x0
        default_ell = case.nominal_iterations[cfg.solver]
    else:
        plant, spec, x0 = load_problem(cfg.problem_path)
        default_ell = None
    if cfg.horizon is not None:
        spec = spec.with_horizon(cfg.horizon)
    if cfg.rscale is not None:
        spec = spec.with_r_scale(cfg.rscale)
    return plant, spec, x0, default_ell


def _require_ell(cfg: RunConfig, default_ell) -> int:
    ell = cfg.ell if cfg.ell is not None else default_ell
    if ell is None:
        raise UsageError("--ell is required when using --problem")
    if ell < 1:
        raise UsageError(f"--ell must be >= 1, got {ell}")
    return int(ell)


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def cmd_certify(cfg: RunConfig) -> int:
    plant, spec, _, default_ell = _resolve(cfg)
    ell = _require_ell(cfg, default_ell)
    report = certify(plant, spec, ell, cfg.solver,
                     precondition=cfg.precondition)
    csv_text = report.csv_header() + "\n" + report.csv_row()
    if cfg.json_out is not None:
        _emit(report.to_json(), cfg.json_out)
    if cfg.out is not None:
        _emit(csv_text, cfg.out)
    if cfg.out is None and cfg.json_out is None:
        _emit(report.to_json() + "\n\n" + csv_text, None)
    return 0 if report.certified else 2


def cmd_simulate(cfg: RunConfig) -> int:
    plant, spec, x0, default_ell = _resolve(cfg)
    ell = _require_ell(cfg, default_ell)
    test = StabilityTest(horizon_steps=cfg.steps,
                         shrink_tolerance=cfg.shrink_tol)
    source = cfg.bench_name or cfg.problem_path
    log = simulate_tdo(plant, spec, cfg.solver, ell, x0,
                       steps=cfg.steps, precondition=cfg.precondition,
                       track_errors=cfg.track_errors,
                       meta={"problem": source})
    _emit("\n".join(log.csv_lines()), cfg.out)
    return 0 if log.passes(test) else 2


def _sweep_point(cfg: RunConfig, plant, spec, x0, default_ell, value):
    if cfg.axis == "ell":
        point_spec, ell = spec, int(value)
    elif cfg.axis == "rscale":
        point_spec = spec.with_r_scale(value)
        ell = _require_ell(cfg, default_ell)
    else:
        point_spec = spec.with_horizon(int(value))
        ell = _require_ell(cfg, default_ell)
    report = certify(plant, point_spec, ell, cfg.solver,
                     precondition=cfg.precondition)
    row = format_sig12(value) + "," + report.csv_row()
    if cfg.empirical:
        found = empirical_min_iterations(
            plant, point_spec, cfg.solver, x0, cfg.ell_max,
            StabilityTest(cfg.steps, cfg.shrink_tol),
            precondition=cfg.precondition)
        row += "," + ("nan" if found is None else str(found))
    return row


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.axis == "none":
        raise UsageError("sweep requires --axis")
    if not cfg.grid:
        raise UsageError("sweep requires a nonempty --grid")
    plant, spec, x0, default_ell = _resolve(cfg)

    header = [cfg.axis] + list(CSV_FIELDS)
    if cfg.empirical:
        header.append("empirical_min_iterations")
    lines = [",".join(header)]

    def run(value):
        return _sweep_point(cfg, plant, spec, x0, default_ell, value)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            lines += list(pool.map(run, cfg.grid))
    else:
        lines += [run(value) for value in cfg.grid]
    _emit("\n".join(lines), cfg.out)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bench", choices=bench.BENCHMARK_NAMES,
                        help="built-in benchmark problem")
    parser.add_argument("--problem", help="path to a problem JSON file")
    parser.add_argument("--solver", choices=[k.value for k in SolverKind],
                        default="pgm")
    parser.add_argument("--ell", type=int,
                        help="solver iterations per control step "
                             "(default: the benchmark's nominal budget)")
    parser.add_argument("--precondition", action="store_true",
                        help="apply diagonal (Jacobi) preconditioning")
    parser.add_argument("--horizon", type=int, help="override the horizon N")
    parser.add_argument("--rscale", type=float,
                        help="scale the input weight R by this factor")
    parser.add_argument("--out", help="write the CSV artifact here "
                                      "(default: stdout)")
    parser.add_argument("--tol", type=float,
                        help="override the numeric tolerance base")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tdompc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_cert = sub.add_parser("certify", help="evaluate the small-gain "
                            "certificate at a fixed iteration budget")
    _add_common(p_cert)
    p_cert.add_argument("--json-out", help="write the report JSON here")

    p_sim = sub.add_parser("simulate", help="run the closed loop and "
                           "apply the shrink test")
    _add_common(p_sim)
    p_sim.add_argument("--steps", type=int, default=400,
                       help="control steps to simulate (default 400)")
    p_sim.add_argument("--stab-tol", type=float, default=1e-4,
                       help="shrink-test tolerance (default 1e-4)")
    p_sim.add_argument("--no-error-log", action="store_true",
                       help="skip per-step oracle solves (no e_norm/psi)")

    p_sweep = sub.add_parser("sweep", help="tabulate certificates over a "
                             "parameter grid")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", choices=_AXES, required=True)
    p_sweep.add_argument("--grid", required=True,
                         help="'a:b' integers or logspace(lo,hi,count)")
    p_sweep.add_argument("--empirical", action="store_true",
                         help="also search the observed minimum stabilizing "
                              "budget per grid point")
    p_sweep.add_argument("--ell-max", type=int, default=_EMPIRICAL_CAP,
                         help="cap for the empirical search")
    p_sweep.add_argument("--steps", type=int, default=400)
    p_sweep.add_argument("--stab-tol", type=float, default=1e-4)
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="concurrent grid points")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        command=args.command,
        bench_name=args.bench,
        problem_path=args.problem,
        solver=SolverKind(args.solver),
        ell=args.ell,
        precondition=args.precondition,
        horizon=args.horizon,
        rscale=args.rscale,
        out=args.out,
        json_out=getattr(args, "json_out", None),
        steps=getattr(args, "steps", 400),
        shrink_tol=getattr(args, "stab_tol", 1e-4),
        track_errors=not getattr(args, "no_error_log", False),
        empirical=getattr(args, "empirical", False),
        ell_max=getattr(args, "ell_max", _EMPIRICAL_CAP),
        jobs=getattr(args, "jobs", 1),
        tol=args.tol,
    )
    if args.command == "sweep":
        cfg.axis = args.axis
        cfg.grid = tuple(parse_grid(args.grid, args.axis))
    if cfg.ell is not None and cfg.ell < 1:
        raise UsageError(f"--ell must be >= 1, got {cfg.ell}")
    if cfg.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {cfg.jobs}")
    return cfg


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.tol is not None:
            config.configure(args.tol)
        cfg = _config_from_args(args)
        handler = {"certify": cmd_certify, "simulate": cmd_simulate,
                   "sweep": cmd_sweep}[cfg.command]
        return handler(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, ArithmeticError, RuntimeError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        config.configure(None)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands: ``compute`` (per-level functional tables by least squares
and/or ALS), ``matrix`` (assemble the interpolated diffusion model and its
export files), ``simulate`` (finite-volume run from a config file), and
``validate`` (built-in invariant suite).  Exit codes: 0 success, 1 usage
error, 2 numerical failure, 3 validation failure.

Every command that writes into a directory first drops a ``manifest.json``
recording the full parameter set, so a run can be reproduced exactly.
Numeric output files are formatted with 17 significant digits; identical
arguments and seeds give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .als import densify, multi_start, write_restart_report
from .dsmodel import (
    assemble_levels,
    export_table,
    export_trace,
    load_model,
    polarization_directions,
    save_model,
)
from .functional import level_values
from .fvm.mesh import save_mesh
from .fvm.simulate import (
    NewtonError,
    load_sim_config,
    mesh_from_config,
    time_loop,
    write_diagnostics,
    write_snapshot,
)
from .lattice import build_lattice, reference_lattice_2d
from .lsq import LsqConvergenceError, assemble_system, solve_lsq
from .validate import run_validation

USAGE_EXIT = 1
NUMERICAL_EXIT = 2
VALIDATION_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the documented contract is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _parse_jumps(text: str, M, d):
    """Lattice from a jump description string or the built-in preset."""
    if text == "preset:reference2d":
        if (M is not None and M != 1) or (d is not None and d != 2):
            raise ValueError("preset:reference2d fixes M=1 and d=2")
        return reference_lattice_2d()
    moves = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        vec_part, _, p_part = chunk.rpartition(":")
        if not vec_part:
            raise ValueError(f"jump {chunk!r}: expected 'v1,...,vd:prob'")
        vec = tuple(int(tok) for tok in vec_part.split(","))
        moves.append((vec, float(p_part)))
    if not moves:
        raise ValueError("empty jump list")
    dim = d if d is not None else len(moves[0][0])
    return build_lattice(M if M is not None else 1, dim, moves)


def _parse_direction(text: str, d: int):
    parts = tuple(float(tok) for tok in text.split(","))
    if len(parts) != d:
        raise ValueError(f"direction {text!r} has {len(parts)} components, "
                         f"need {d}")
    return parts


def _direction_label(u) -> str:
    return " ".join(f"{c:g}" for c in u)


def _write_manifest(directory, command, params, outputs):
    os.makedirs(directory, exist_ok=True)
    payload = {
        "command": command,
        "argv": sys.argv[1:],
        "parameters": params,
        "version": __version__,
        "generated_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": outputs,
    }
    path = os.path.join(directory, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    return path


# -- compute --------------------------------------------------------------------


def cmd_compute(args) -> int:
    try:
        spec = _parse_jumps(args.jumps, args.M, args.d)
        directions = ([_parse_direction(t, spec.d) for t in args.u]
                      if args.u else polarization_directions(spec.d))
    except ValueError as exc:
        print(f"compute: {exc}", file=sys.stderr)
        return USAGE_EXIT

    lsq_tol = args.tol if (args.tol is not None and args.method == "lsq") else 1e-10
    als_eps = args.tol if (args.tol is not None and args.method != "lsq") else 1e-5
    rows = []
    try:
        for u in directions:
            label = _direction_label(u)
            if args.method in ("lsq", "both"):
                psi = solve_lsq(assemble_system(spec, u), tol=lsq_tol)
                vals = level_values(spec, psi, u)
                total = float(vals @ _binoms(spec))
                rows.append((label, "lsq", vals))
                print(f"u = ({label})  lsq   optimum = {total:.6f}")
            if args.method in ("als", "both"):
                result = multi_start(spec, u, restarts=args.restarts,
                                     seed=args.seed, epsilon=als_eps,
                                     max_sweeps=args.max_sweeps)
                vals = level_values(spec, densify(spec, result.best.factors), u)
                rows.append((label, "als", vals))
                stats = result.summary()
                print(f"u = ({label})  als   best = {stats['min']:.6f}  "
                      f"mean = {stats['mean']:.6f}  max = {stats['max']:.6f}  "
                      f"restarts = {stats['restarts']}  seed = {stats['seed']}")
                if args.als_report:
                    write_restart_report(result, args.als_report)
    except LsqConvergenceError as exc:
        print(f"compute: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT

    n_levels = spec.num_sites + 1
    header = ["u", "method"] + [f"l{i}" for i in range(n_levels)]
    print()
    print("  ".join(f"{h:>10}" for h in header))
    for label, method, vals in rows:
        cells = [f"({label})", method] + [f"{v:.4f}" for v in vals]
        print("  ".join(f"{c:>10}" for c in cells))

    if args.out:
        out_dir = os.path.dirname(os.path.abspath(args.out))
        _write_manifest(out_dir, "compute", {
            "M": spec.M, "d": spec.d, "jumps": args.jumps,
            "directions": [_direction_label(u) for u in directions],
            "method": args.method, "restarts": args.restarts,
            "seed": args.seed, "lsq_tol": lsq_tol, "als_epsilon": als_eps,
            "max_sweeps": args.max_sweeps,
        }, [os.path.basename(args.out)])
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(",".join(header) + "\n")
            for label, method, vals in rows:
                fh.write(",".join([label.replace(" ", ";"), method]
                                  + [_fmt(v) for v in vals]) + "\n")
        print(f"\nwrote {args.out}")
    return 0


def _binoms(spec):
    from .functional import level_binoms

    return level_binoms(spec.num_sites)


# -- matrix ---------------------------------------------------------------------


def cmd_matrix(args) -> int:
    try:
        spec = _parse_jumps(args.jumps, args.M, args.d)
    except ValueError as exc:
        print(f"matrix: {exc}", file=sys.stderr)
        return USAGE_EXIT

    lsq_tol = args.tol if (args.tol is not None and args.method == "lsq") else 1e-10
    als_eps = args.tol if (args.tol is not None and args.method == "als") else 1e-5
    out_dir = args.out_dir
    _write_manifest(out_dir, "matrix", {
        "M": spec.M, "d": spec.d, "jumps": args.jumps, "method": args.method,
        "restarts": args.restarts, "seed": args.seed, "lsq_tol": lsq_tol,
        "als_epsilon": als_eps, "max_sweeps": args.max_sweeps,
        "trace_samples": args.trace_samples,
    }, ["ds_table.csv", "trace.dat", "ds_model.json"])

    try:
        model = assemble_levels(
            spec, method=args.method, lsq_tol=lsq_tol, restarts=args.restarts,
            seed=args.seed, als_epsilon=als_eps, max_sweeps=args.max_sweeps,
            progress=lambda msg: print(f"  {msg}"))
    except (LsqConvergenceError, ValueError) as exc:
        print(f"matrix: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT

    table = os.path.join(out_dir, "ds_table.csv")
    trace = os.path.join(out_dir, "trace.dat")
    model_file = os.path.join(out_dir, "ds_model.json")
    export_table(model, table)
    export_trace(model, trace, samples=args.trace_samples)
    save_model(model, model_file)
    d0 = model.eval_Ds(0.0)
    d1 = model.eval_Ds(1.0)
    print(f"levels = {model.num_sites + 1}, method = {model.method}")
    print(f"D_s(0) =\n{d0}")
    print(f"D_s(1) =\n{d1}")
    print(f"wrote {table}, {trace}, {model_file}")
    return 0


# -- simulate -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        config = load_sim_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return USAGE_EXIT
    model_path = args.ds or config.ds_model
    if model_path is None:
        print("simulate: no diffusion model (--ds or config ds_model)",
              file=sys.stderr)
        return USAGE_EXIT
    try:
        model = load_model(model_path)
        mesh = mesh_from_config(config)
    except (OSError, ValueError) as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return USAGE_EXIT

    out_dir = args.out_dir
    n_steps = int(round(config.t_final / config.dt))
    planned = ["diagnostics.csv", "mesh.txt"]
    _write_manifest(out_dir, "simulate", {
        "config": os.path.abspath(args.config),
        "ds_model": os.path.abspath(model_path),
        "dt": config.dt, "t_final": config.t_final,
        "newton_tol": config.newton_tol, "max_newton": config.max_newton,
        "newton_floor_factor": config.newton_floor_factor,
        "snapshot_every": config.snapshot_every, "mesh": config.mesh,
        "initial_red": config.initial_red, "initial_blue": config.initial_blue,
        "steps": n_steps,
    }, planned + ["snapshot_*.csv"])

    try:
        result = time_loop(mesh, model, config, progress=lambda m: print(f"  {m}"))
    except NewtonError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except ValueError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return USAGE_EXIT

    write_diagnostics(result.diagnostics, os.path.join(out_dir, "diagnostics.csv"))
    save_mesh(mesh, os.path.join(out_dir, "mesh.txt"))
    for step, _, red, blue in result.snapshots:
        write_snapshot(mesh, red, blue,
                       os.path.join(out_dir, f"snapshot_{step:06d}.csv"))
    iters = result.newton_iters
    final = result.final_state
    print(f"completed {n_steps} steps to t = {final.time:g}")
    print(f"newton iterations: max = {int(iters.max())}, "
          f"median = {float(np.median(iters)):g}")
    print(f"final red  in [{final.rho_red.min():.6f}, {final.rho_red.max():.6f}]")
    print(f"final blue in [{final.rho_blue.min():.6f}, {final.rho_blue.max():.6f}]")
    print(f"max bound violation = {result.counters['max_bound_violation']:.3e}")
    print(f"degenerate-flux events = {result.counters['degenerate_edges']}, "
          f"clamped-density events = {result.counters['clamped_cells']}")
    print(f"wrote {len(result.snapshots)} snapshots and diagnostics.csv "
          f"to {out_dir}")
    return 0


# -- validate -------------------------------------------------------------------


def cmd_validate(args) -> int:
    results = run_validation(progress=(print if args.verbose else None))
    width = max(len(name) for name, _, _ in results)
    failures = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        failures += 0 if ok else 1
        print(f"{status}  {name:<{width}}  {detail}")
    if failures:
        print(f"{failures} of {len(results)} checks failed")
        return VALIDATION_EXIT
    print(f"all {len(results)} checks passed")
    return 0


# -- parser wiring ----------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="selfdiffusion",
                     description="Self-diffusion matrices of the tagged-particle "
                                 "exclusion process and a finite-volume solver "
                                 "driven by them.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_lattice_flags(p):
        p.add_argument("--M", type=int, default=None,
                       help="box radius (default: preset's)")
        p.add_argument("--d", type=int, default=None,
                       help="dimension (default: preset's)")
        p.add_argument("--jumps", default="preset:reference2d",
                       help="'preset:reference2d' or 'v1,..,vd:p;...' jump list")

    def add_solver_flags(p, methods):
        p.add_argument("--method", choices=methods, default=methods[-1])
        p.add_argument("--restarts", type=int, default=100,
                       help="ALS restarts (default 100)")
        p.add_argument("--seed", type=int, default=0,
                       help="ALS base seed (default 0)")
        p.add_argument("--tol", type=float, default=None,
                       help="method tolerance: least-squares normal-equation "
                            "tolerance (default 1e-10) or ALS sweep tolerance "
                            "(default 1e-5)")
        p.add_argument("--max-sweeps", type=int, default=500,
                       help="ALS sweep cap per restart (default 500)")

    p = sub.add_parser("compute",
                       help="per-level functional values along directions")
    add_lattice_flags(p)
    p.add_argument("--u", action="append", metavar="C1,...,Cd",
                   help="direction (repeatable; default: polarization set)")
    add_solver_flags(p, ["lsq", "als", "both"])
    p.add_argument("--out", help="write the per-level table CSV here")
    p.add_argument("--als-report", help="write per-restart ALS statistics CSV")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("matrix",
                       help="assemble and export the diffusion-matrix model")
    add_lattice_flags(p)
    add_solver_flags(p, ["als", "lsq"])
    p.add_argument("--out-dir", default=".",
                   help="output directory (default: current)")
    p.add_argument("--trace-samples", type=int, default=201,
                   help="rows in trace.dat (default 201)")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("simulate", help="run the finite-volume solver")
    p.add_argument("--config", required=True, help="JSON run description")
    p.add_argument("--ds", help="diffusion-model JSON (overrides config)")
    p.add_argument("--out-dir", default=".",
                   help="output directory (default: current)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="run the built-in invariant suite")
    p.add_argument("--verbose", action="store_true",
                   help="print checks as they run")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

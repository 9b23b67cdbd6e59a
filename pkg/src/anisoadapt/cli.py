"""Command-line driver: ``anisoadapt {solve,adapt,audit,convergence,mesh}``.

Every run directory gets ``manifest.json``, a human-readable ``report.txt``
and a machine-readable ``report.kv`` holding one record per line as
space-separated ``key=value`` pairs.  Exit codes: 0 success, 2 I/O,
3 invalid input, 4 numerical failure, 5 external mesher.
"""
import argparse
import contextlib
import json
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, quality
from .adapt import AdaptConfig, adapt_loop, compute_metric
from .errors import AnisoError
from .femsolve import l2_error, mp_report, solve_problem
from .metric import MetricKind
from .problems import load_config
from .quality import format_value as _fmt
from .tetmesh import ElementField, read_medit, write_medit, write_sol, write_vtk

SEED = 0


def kv_line(record):
    return " ".join(f"{k}={_fmt(v)}" for k, v in record.items())


def table(records):
    if not records:
        return ""
    keys = list(records[0])
    cells = [[_fmt(r.get(k, "")) for k in keys] for r in records]
    widths = [max(len(k), *(len(row[i]) for row in cells)) for i, k in enumerate(keys)]
    lines = ["  ".join(k.rjust(w) for k, w in zip(keys, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def prepare_out(out, force):
    out = Path(out)
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"output directory {out} is not empty (use --force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out, args, **extra):
    manifest = {
        "command": args.command,
        "config": getattr(args, "config", None),
        "mesh": getattr(args, "mesh", None),
        "metric": getattr(args, "metric", None),
        "backend": getattr(args, "backend", None),
        "iterations": getattr(args, "iterations", None),
        "output": str(out),
        "seed": SEED,
        "version": __version__,
    }
    manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_reports(out, records, header=""):
    (out / "report.kv").write_text("".join(kv_line(r) + "\n" for r in records))
    (out / "report.txt").write_text(header + table(records))


def _load(args):
    cfg = load_config(args.config)
    mesh = read_medit(args.mesh) if getattr(args, "mesh", None) else cfg.mesh.build()
    return cfg, mesh


def solution_record(mesh, problem, solution):
    rep = mp_report(solution, problem)
    rec = {"N": mesh.n_elements, "n_vertices": mesh.n_vertices, "u_min": solution.u_min,
           "u_max": solution.u_max, "mp_violated": rep.violated, "overshoot": rep.overshoot}
    if problem.exact_solution is not None:
        rec["l2_error"] = l2_error(mesh, solution.u, problem.exact_solution)
    rec["cg_iterations"] = solution.iterations
    rec["residual"] = solution.residual
    return rec


def cmd_solve(args):
    cfg, mesh = _load(args)
    out = prepare_out(args.out, args.force)
    sol = solve_problem(mesh, cfg.problem)
    mesh = sol.mesh
    rec = solution_record(mesh, cfg.problem, sol)
    write_manifest(out, args, problem=cfg.problem.name)
    write_medit(mesh, out / "mesh.mesh")
    write_vtk(mesh, {"u": sol.u}, out / "solution.vtk", title=cfg.problem.name)
    write_reports(out, [rec], f"problem {cfg.problem.name}\n")
    print(kv_line(rec))
    return 0


def cmd_adapt(args):
    cfg, mesh = _load(args)
    out = prepare_out(args.out, args.force)
    config = AdaptConfig(args.metric, args.iterations, args.target_n, args.backend, args.mesher_cmd)
    records = []

    def log(rec, it_mesh, metric):
        records.append(rec.summary())
        stem = out / f"iter{rec.iteration}"
        write_medit(it_mesh, stem.with_suffix(".mesh"))
        write_sol(ElementField(metric.tensors), stem.with_suffix(".sol"))
        (out / f"iter{rec.iteration}_quality.txt").write_text(rec.quality.to_table())
        print(kv_line(rec.summary()), flush=True)

    try:
        result = adapt_loop(cfg.problem, mesh, config, callback=log)
    finally:
        write_manifest(out, args, problem=cfg.problem.name, target_N=config.target_N or mesh.n_elements)
        write_reports(out, records, f"problem {cfg.problem.name} metric {config.metric_kind.value} "
                                    f"backend {config.backend.value}\n")
    write_medit(result.mesh, out / "final.mesh")
    write_vtk(result.mesh, {"u": result.solution.u}, out / "final.vtk", title=cfg.problem.name)
    return 0


def cmd_audit(args):
    if args.mesh is None and args.config is None:
        raise ValueError("audit needs --mesh or --config")
    if args.config:
        cfg, mesh = _load(args)
        problem = cfg.problem
    else:
        mesh, problem = read_medit(args.mesh), None
    kind = MetricKind.parse(args.metric)
    if problem is None:
        D = np.eye(3)
        if kind is not MetricKind.Identity:
            raise ValueError("metrics other than 'id' need a --config with the diffusion tensor")
        metric = np.eye(3)
    else:
        mesh = problem.prepare(mesh)
        D = problem.element_diffusion(mesh)
        if kind in (MetricKind.Adap, MetricKind.DmpAdap):
            metric = compute_metric(kind, mesh, solve_problem(mesh, problem), problem)
        else:
            metric = compute_metric(kind, mesh, None, problem)
    rep = quality.report(mesh, metric, D)
    sys.stdout.write(rep.to_kv() if args.kv else rep.to_table())
    return 0


def convergence_rate(h, err):
    """Least-squares slope of log(err) against log(h); ``None`` at round-off level."""
    err = np.asarray(err, dtype=float)
    if len(err) < 2 or np.any(err <= 1e-12):
        return None
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def cmd_convergence(args):
    cfg = load_config(args.config)
    if cfg.problem.exact_solution is None:
        raise ValueError("convergence study needs a problem with an exact solution")
    out = prepare_out(args.out, args.force) if args.out else None
    records = []
    for n in args.n:
        mesh = cfg.mesh.build(n)
        sol = solve_problem(mesh, cfg.problem)
        err = l2_error(sol.mesh, sol.u, cfg.problem.exact_solution)
        lo, hi = mesh.bounding_box
        records.append({"n": n, "N": mesh.n_elements, "h": float(np.max(hi - lo)) / n, "l2_error": err, "u_min": sol.u_min})
    for i, rec in enumerate(records):
        rate = convergence_rate([records[i - 1]["h"], rec["h"]], [records[i - 1]["l2_error"], rec["l2_error"]]) \
            if i else None
        rec["rate"] = "n/a" if rate is None else rate
    slope = convergence_rate([r["h"] for r in records], [r["l2_error"] for r in records])
    summary = {"slope": "n/a" if slope is None else slope}
    text = table(records) + kv_line(summary) + "\n"
    sys.stdout.write(text)
    if out is not None:
        write_manifest(out, args, n=list(args.n))
        (out / "report.kv").write_text("".join(kv_line(r) + "\n" for r in records + [summary]))
        (out / "report.txt").write_text(text)
    return 0


def cmd_mesh(args):
    cfg = load_config(args.config)
    n = None
    if args.n:
        n = args.n[0] if len(args.n) == 1 else tuple(args.n)
    mesh = cfg.mesh.build(n)
    write_medit(mesh, args.output)
    print(f"N={mesh.n_elements} n_vertices={mesh.n_vertices} path={args.output}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="anisoadapt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread limit (default: all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="INI problem description")
        sp.add_argument("--mesh", help="MEDIT .mesh file (default: the mesh described by the config)")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
            sp.add_argument("--force", action="store_true", help="write into a non-empty output directory")

    s = sub.add_parser("solve", help="solve once and report")
    common(s)
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("adapt", help="run the adaptation loop")
    common(a)
    a.add_argument("--metric", default="adap", choices=[k.value for k in MetricKind])
    a.add_argument("--iterations", type=int, default=5)
    a.add_argument("--backend", default="bisect", choices=["affine", "bisect", "external"])
    a.add_argument("--mesher-cmd", help="command template with {in_mesh} {in_sol} {out_mesh}")
    a.add_argument("--target-n", type=int, default=None, help="desired element count")
    a.set_defaults(func=cmd_adapt)

    q = sub.add_parser("audit", help="mesh quality report on standard output")
    common(q, out=False)
    q.add_argument("--metric", default="id", choices=[k.value for k in MetricKind])
    q.add_argument("--kv", action="store_true", help="key=value output")
    q.set_defaults(func=cmd_audit)

    c = sub.add_parser("convergence", help="L2 error table over uniform refinements")
    c.add_argument("--config", required=True)
    c.add_argument("--n", type=int, nargs="+", default=[4, 8, 16])
    c.add_argument("--out")
    c.add_argument("--force", action="store_true")
    c.set_defaults(func=cmd_convergence)

    m = sub.add_parser("mesh", help="write the configured mesh to a MEDIT file")
    m.add_argument("--config", required=True)
    m.add_argument("--n", type=int, nargs="+", help="one count per axis, or a single count for all three")
    m.add_argument("--output", required=True)
    m.set_defaults(func=cmd_mesh)
    return p


def exit_code(exc):
    if isinstance(exc, AnisoError):
        return exc.exit_code
    if isinstance(exc, (OSError, UnicodeDecodeError)):
        return 2
    if isinstance(exc, (ValueError, KeyError, TypeError)):
        return 3
    if isinstance(exc, (ArithmeticError, np.linalg.LinAlgError)):
        return 4
    return 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "func", None) is cmd_audit and args.config is None and args.mesh is None:
        parser.error("audit needs --mesh or --config")
    limit = contextlib.nullcontext()
    if args.threads:
        limit = threadpool_limits(args.threads)
    try:
        with limit:
            return args.func(args)
    except Exception as exc:  # mapped to the documented exit codes
        code = exit_code(exc)
        if code == 1:
            raise
        print(f"anisoadapt: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())

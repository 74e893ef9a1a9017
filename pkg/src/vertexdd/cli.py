"""Solve elasticity and curl-curl model problems with the vertex-based substructuring preconditioner.

Exit codes: 0 when every solve converged, 2 when any cell did not converge,
1 on any other error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .fem import (CoefficientField, assemble, build_dofmap, manufactured_rhs, write_matrix_market,
                  write_vector_market)
from .harness import TABLES, ExperimentConfig, format_csv, run_experiment, run_table
from .mesh import build_hier_mesh, classify_regions

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def _ints(text: str):
    return [int(t) for t in text.split(",") if t]


def _floats(text: str):
    return [float(t) for t in text.split(",") if t]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    # defaults are None so that a config file can fill them
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--model", choices=["elasticity", "maxwell"])
    p.add_argument("--n", type=int, help="subdomains per axis")
    p.add_argument("--m", type=int, help="fine cubes per subdomain axis")
    p.add_argument("--case", choices=["nojump", "jump"])
    p.add_argument("--choice", type=int, choices=[1, 2], help="jump region D")
    p.add_argument("--jump-in", type=_floats, metavar="V[,V2]",
                   help="coefficient values inside D (one value sets both)")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--rhs-mode", choices=["analytic", "interpolant"])
    p.add_argument("--errors", action="store_true", default=None, dest="compute_errors",
                   help="report discretization errors (unit coefficients only)")
    p.add_argument("--check-symmetry", action="store_true", default=None)


def _config_from(args) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        data.update(json.loads(args.config.read_text()))
    for name in ("model", "n", "m", "case", "choice", "tol", "max_iter", "rhs_mode",
                 "compute_errors", "check_symmetry"):
        val = getattr(args, name)
        if val is not None:
            data[name] = val
    if args.jump_in is not None:
        data["jump_in"] = args.jump_in * 2 if len(args.jump_in) == 1 else args.jump_in[:2]
    return ExperimentConfig.from_dict(data)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vertexdd", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one configuration")
    _add_run_flags(run)
    run.add_argument("--out", type=Path, help="output file (default stdout)")
    run.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")

    tab = sub.add_parser("table", help="sweep one results table")
    tab.add_argument("table", choices=sorted(TABLES))
    tab.add_argument("--ms", type=_ints, help="comma-separated m values")
    tab.add_argument("--ns", type=_ints, help="comma-separated n values")
    tab.add_argument("--choices", type=_ints, default=[1, 2])
    tab.add_argument("--jumps", type=_floats, default=[1e-5, 1e5])
    tab.add_argument("--tol", type=float, default=1e-6)
    tab.add_argument("--max-iter", type=int, default=500)
    tab.add_argument("--rhs-mode", choices=["analytic", "interpolant"], default="analytic")
    tab.add_argument("--out", type=Path, help="output file (default stdout)")
    tab.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")

    dm = sub.add_parser("dump-mesh", help="write the fine mesh as plain text")
    dm.add_argument("--n", type=int, required=True)
    dm.add_argument("--m", type=int, required=True)
    dm.add_argument("--out", type=Path, required=True)

    mm = sub.add_parser("dump-system", help="write A and b in MatrixMarket format")
    _add_run_flags(mm)
    mm.add_argument("--out", type=Path, required=True, help="prefix; writes PREFIX_A.mtx, PREFIX_b.mtx")
    return ap


def _open_out(path):
    return open(path, "w") if path is not None else sys.stdout


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            res = run_experiment(_config_from(args))
            fh = _open_out(args.out)
            try:
                if args.format == "csv":
                    fh.write(format_csv([res]))
                else:
                    fh.write(json.dumps(res.to_dict(), allow_nan=False) + "\n")
            finally:
                if fh is not sys.stdout:
                    fh.close()
            return EXIT_OK if res.converged else EXIT_NOT_CONVERGED
        if args.command == "table":
            fh = _open_out(args.out)
            try:
                results = run_table(args.table, args.ms, args.ns, out=fh, fmt=args.format,
                                    choices=args.choices, jumps=args.jumps, tol=args.tol,
                                    max_iter=args.max_iter, rhs_mode=args.rhs_mode)
            finally:
                if fh is not sys.stdout:
                    fh.close()
            if any(r.error for r in results):
                return EXIT_ERROR
            return EXIT_OK if all(r.converged for r in results) else EXIT_NOT_CONVERGED
        if args.command == "dump-mesh":
            mesh = build_hier_mesh(args.n, args.m)
            with open(args.out, "w") as fh:
                mesh.dump(fh)
            return EXIT_OK
        if args.command == "dump-system":
            cfg = _config_from(args)
            mesh = build_hier_mesh(cfg.n, cfg.m)
            dmap = build_dofmap(cfg.model, mesh, classify_regions(mesh))
            A = assemble(cfg.model, mesh, cfg.coefficients(), dmap)
            b = manufactured_rhs(cfg.model, mesh, cfg.coefficients(), dmap, mode=cfg.rhs_mode, A=A)
            write_matrix_market(f"{args.out}_A.mtx", A)
            write_vector_market(f"{args.out}_b.mtx", b)
            return EXIT_OK
    except Exception as exc:
        logging.getLogger("vertexdd").error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

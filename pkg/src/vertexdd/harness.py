"""Experiment driver: one PCG solve per configuration, sweeps over tables."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from dataclasses import dataclass, field
from typing import IO, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .fem import (Case, Choice, CoefficientField, Model, RhsMode, assemble, build_dofmap,
                  coarse_prolongation, energy_error, manufactured_rhs)
from .linalg import FactorCache, NonPositivePivot, NotConverged, pcg
from .mesh import build_hier_mesh, classify_regions
from .precond import SubstructPrecond

log = logging.getLogger(__name__)

CSV_COLUMNS = ["model", "case", "choice", "jump", "n", "m", "dofs", "iters",
               "ritz_min", "ritz_max", "setup_s", "solve_s"]

# Reference PCG iteration counts of every table cell, keyed by
# (table, choice, jump, m, n). Smooth tables carry choice=None, jump=None.
REFERENCE_ITERS = {}


def _fill_reference():
    smooth = {
        "E-smooth": [[18, 19, 19, 18], [20, 20, 20, 19], [22, 21, 21, 20], [23, 23, 22, 21]],
        "M-smooth": [[16, 16, 15, 15], [18, 17, 17, 16], [19, 19, 18, 18], [20, 20, 19, 19]],
    }
    for tab, rows in smooth.items():
        for m, row in zip((4, 8, 12, 16), rows):
            for n, it in zip((4, 6, 8, 10), row):
                REFERENCE_ITERS[(tab, None, None, m, n)] = it
    # columns: choice 1 (1e-5: n=4,8; 1e5: n=4,8), choice 2 (same)
    jump = {
        "E-jump": [[16, 18, 25, 22, 16, 19, 25, 22], [17, 20, 27, 23, 17, 21, 27, 23],
                   [19, 21, 28, 24, 18, 23, 28, 24], [20, 22, 29, 25, 20, 24, 29, 26]],
        "M-jump": [[14, 15, 19, 18, 13, 16, 18, 19], [15, 17, 21, 20, 15, 17, 21, 21],
                   [16, 19, 23, 21, 16, 19, 22, 23], [17, 20, 24, 22, 17, 20, 24, 24]],
    }
    cols = [(c, j, n) for c in (1, 2) for j in (1e-5, 1e5) for n in (4, 8)]
    for tab, rows in jump.items():
        for m, row in zip((4, 8, 12, 16), rows):
            for (c, j, n), it in zip(cols, row):
                REFERENCE_ITERS[(tab, c, j, m, n)] = it


_fill_reference()

TABLES = {
    "E-smooth": dict(model=Model.ELASTICITY, jump=False, ms=(4, 8, 12, 16), ns=(4, 6, 8, 10)),
    "E-jump": dict(model=Model.ELASTICITY, jump=True, ms=(4, 8, 12, 16), ns=(4, 8)),
    "M-smooth": dict(model=Model.MAXWELL, jump=False, ms=(4, 8, 12, 16), ns=(4, 6, 8, 10)),
    "M-jump": dict(model=Model.MAXWELL, jump=True, ms=(4, 8, 12, 16), ns=(4, 8)),
}


@dataclass
class ExperimentConfig:
    model: str = "elasticity"
    n: int = 4
    m: int = 4
    case: str = "nojump"
    choice: int = 1
    jump_in: Tuple[float, float] = (1.0, 1.0)
    tol: float = 1e-6
    max_iter: int = 500
    rhs_mode: str = "analytic"
    compute_errors: bool = False
    check_symmetry: bool = False

    def __post_init__(self):
        self.model = Model.parse(self.model).value
        self.case = Case(self.case).value
        self.rhs_mode = RhsMode(self.rhs_mode).value
        if isinstance(self.jump_in, (int, float)):
            self.jump_in = (float(self.jump_in), float(self.jump_in))
        self.jump_in = tuple(float(v) for v in self.jump_in)
        if self.n < 1 or self.m < 1:
            raise ValueError(f"n and m must be positive, got n={self.n}, m={self.m}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")
        if min(self.jump_in) <= 0:
            raise ValueError(f"jump values must be positive, got {self.jump_in}")
        Choice(self.choice)

    def coefficients(self) -> CoefficientField:
        if self.case == Case.NO_JUMP.value:
            return CoefficientField()
        return CoefficientField(Case.JUMP, Choice(self.choice), self.jump_in)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class ExperimentResult:
    config: dict
    n_dofs: int
    iterations: int
    converged: bool
    ritz_min: float
    ritz_max: float
    final_residual: float
    setup_s: float
    solve_s: float
    residual_history: List[float] = field(default_factory=list)
    precond: dict = field(default_factory=dict)
    energy_error: Optional[float] = None
    l2_error: Optional[float] = None
    symmetry_defect: Optional[float] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        """Plain dict; non-finite floats become ``None`` so the row is valid JSON."""
        out = dataclasses.asdict(self)
        for key, val in out.items():
            if isinstance(val, float) and not np.isfinite(val):
                out[key] = None
        return out

    def csv_row(self) -> dict:
        c = self.config
        return {
            "model": c["model"], "case": c["case"],
            "choice": c["choice"] if c["case"] == "jump" else "",
            "jump": c["jump_in"][0] if c["case"] == "jump" else "",
            "n": c["n"], "m": c["m"], "dofs": self.n_dofs, "iters": self.iterations,
            "ritz_min": f"{self.ritz_min:.6g}", "ritz_max": f"{self.ritz_max:.6g}",
            "setup_s": f"{self.setup_s:.3f}", "solve_s": f"{self.solve_s:.3f}",
        }


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"{stage} failed: {cause}")


def run_experiment(config: ExperimentConfig, strict: bool = False) -> ExperimentResult:
    """Build, precondition and solve one configuration.

    Deterministic for a given config: fixed orderings and a zero initial
    guess. With ``strict`` a non-converged solve raises ``NotConverged``.
    """
    model = Model.parse(config.model)
    coeffs = config.coefficients()
    t0 = time.perf_counter()
    stage = "mesh"
    try:
        mesh = build_hier_mesh(config.n, config.m)
        regions = classify_regions(mesh)
        stage = "assembly"
        dm = build_dofmap(model, mesh, regions)
        A = assemble(model, mesh, coeffs, dm)
        b = manufactured_rhs(model, mesh, coeffs, dm, mode=RhsMode(config.rhs_mode), A=A)
        P = coarse_prolongation(model, mesh, dm)
        stage = "preconditioner setup"
        pc = SubstructPrecond(A, dm, P, cache=FactorCache())
    except NonPositivePivot as exc:
        raise StageError(stage, exc) from exc
    setup_s = time.perf_counter() - t0

    sym = pc.symmetry_defect() if config.check_symmetry else None
    t1 = time.perf_counter()
    x, rep = pcg(A, b, pc, tol=config.tol, max_iter=config.max_iter)
    solve_s = time.perf_counter() - t1

    result = ExperimentResult(
        config=dataclasses.asdict(config), n_dofs=dm.n_dofs, iterations=rep.iterations,
        converged=rep.converged, ritz_min=rep.ritz_min, ritz_max=rep.ritz_max,
        final_residual=float(rep.final_residual), setup_s=setup_s, solve_s=solve_s,
        residual_history=[float(r) for r in rep.residual_history], precond=pc.stats(),
        symmetry_defect=sym)
    if config.compute_errors and not coeffs.has_jump:
        result.energy_error, result.l2_error = energy_error(model, mesh, dm, x)
    log.info("%s n=%d m=%d dofs=%d iters=%d ritz=[%.3g, %.3g]", model.value, config.n, config.m,
             dm.n_dofs, rep.iterations, rep.ritz_min, rep.ritz_max)
    if strict and not rep.converged:
        raise NotConverged(rep)
    return result


def table_configs(table: str, ms: Optional[Sequence[int]] = None, ns: Optional[Sequence[int]] = None,
                  choices: Sequence[int] = (1, 2), jumps: Sequence[float] = (1e-5, 1e5),
                  **overrides) -> List[ExperimentConfig]:
    if table not in TABLES:
        raise ValueError(f"unknown table {table!r}; expected one of {sorted(TABLES)}")
    layout = TABLES[table]
    ms = tuple(ms) if ms else layout["ms"]
    ns = tuple(ns) if ns else layout["ns"]
    out = []
    for m in ms:
        if not layout["jump"]:
            out.extend(ExperimentConfig(model=layout["model"].value, n=n, m=m, **overrides) for n in ns)
            continue
        for c in choices:
            for j in jumps:
                out.extend(ExperimentConfig(model=layout["model"].value, n=n, m=m, case="jump",
                                            choice=c, jump_in=(j, j), **overrides) for n in ns)
    return out


def reference_iterations(table: str, cfg: ExperimentConfig) -> Optional[int]:
    if TABLES[table]["jump"]:
        key = (table, cfg.choice, cfg.jump_in[0], cfg.m, cfg.n)
    else:
        key = (table, None, None, cfg.m, cfg.n)
    return REFERENCE_ITERS.get(key)


def run_table(table: str, ms=None, ns=None, out: Optional[IO[str]] = None, fmt: str = "jsonl",
              **kw) -> List[ExperimentResult]:
    """Run every cell of a table; each finished row is written and flushed
    immediately, and failing cells become rows carrying ``error``."""
    choices = kw.pop("choices", (1, 2))
    jumps = kw.pop("jumps", (1e-5, 1e5))
    configs = table_configs(table, ms, ns, choices=choices, jumps=jumps, **kw)
    writer = None
    if out is not None and fmt == "csv":
        writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS + ["reference_iters"])
        writer.writeheader()
    results = []
    for cfg in configs:
        try:
            res = run_experiment(cfg)
        except Exception as exc:  # keep going, the row records the failure
            log.exception("cell failed: %s", cfg)
            res = ExperimentResult(config=dataclasses.asdict(cfg), n_dofs=0, iterations=0,
                                   converged=False, ritz_min=float("nan"), ritz_max=float("nan"),
                                   final_residual=float("nan"), setup_s=0.0, solve_s=0.0,
                                   error=f"{type(exc).__name__}: {exc}")
        results.append(res)
        if out is not None:
            ref = reference_iterations(table, cfg)
            if writer is not None:
                writer.writerow({**res.csv_row(), "reference_iters": "" if ref is None else ref})
            else:
                row = res.to_dict()
                row["table"] = table
                row["reference_iters"] = ref
                out.write(json.dumps(row, default=_json_default, allow_nan=False) + "\n")
            out.flush()
    return results


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def format_csv(results: Iterable[ExperimentResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    w.writeheader()
    for r in results:
        w.writerow(r.csv_row())
    return buf.getvalue()

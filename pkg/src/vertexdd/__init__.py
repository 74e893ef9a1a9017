"""Substructuring preconditioner with vertex-related local interface solvers."""
from .fem import (Case, Choice, CoefficientField, DofMap, Model, RhsMode, assemble,
                  build_dofmap, coarse_prolongation, manufactured_rhs)
from .harness import ExperimentConfig, ExperimentResult, run_experiment, run_table
from .linalg import (CholeskyFactor, FactorCache, NonPositivePivot, NotConverged, SolveReport, ldlt_factor,
                     ldlt_solve, pcg, ritz_extremes, submatrix)
from .mesh import HierMesh, RegionIndex, build_hier_mesh, classify_regions
from .precond import SubstructPrecond, apply_precond, build_precond, harmonic_extension

__version__ = "0.1.0"

import numpy as np
import pytest
import scipy.sparse as sp

from vertexdd import fem, mesh
from vertexdd.linalg import FactorCache
from vertexdd.precond import SubstructPrecond


@pytest.fixture(scope="session")
def hier_cache():
    return {}


@pytest.fixture(scope="session")
def hier(hier_cache):
    """Cached (mesh, regions) pairs keyed by (n, m)."""
    def get(n, m):
        if (n, m) not in hier_cache:
            hm = mesh.build_hier_mesh(n, m)
            hier_cache[(n, m)] = (hm, mesh.classify_regions(hm))
        return hier_cache[(n, m)]
    return get


@pytest.fixture(scope="session")
def system(hier):
    """Assembled system with its preconditioner for small instances."""
    store = {}

    def get(model, n, m, coeffs=None):
        coeffs = coeffs or fem.CoefficientField()
        key = (model, n, m, coeffs)
        if key not in store:
            hm, reg = hier(n, m)
            dm = fem.build_dofmap(model, hm, reg)
            A = fem.assemble(model, hm, coeffs, dm)
            P = fem.coarse_prolongation(model, hm, dm)
            pc = SubstructPrecond(A, dm, P, cache=FactorCache())
            store[key] = dict(mesh=hm, regions=reg, dofmap=dm, A=A, P=P, pc=pc, coeffs=coeffs)
        return store[key]
    return get


def dense_ldlt(A):
    """Unpivoted dense LDL^T by plain row elimination."""
    A = np.array(A, dtype=float)
    n = len(A)
    L = np.eye(n)
    d = np.zeros(n)
    for j in range(n):
        d[j] = A[j, j] - (L[j, :j] ** 2) @ d[:j]
        for i in range(j + 1, n):
            L[i, j] = (A[i, j] - (L[i, :j] * L[j, :j]) @ d[:j]) / d[j]
    return L, d


def dense_ldlt_solve(L, d, b):
    y = np.linalg.solve(L, b)  # triangular, small
    return np.linalg.solve(L.T, y / d)


def random_spd(n, seed=0):
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    return Q @ Q.T + n * np.eye(n)


ALL_COEFFS = [
    fem.CoefficientField(),
    fem.CoefficientField.jump(1, 1e-5),
    fem.CoefficientField.jump(1, 1e5),
    fem.CoefficientField.jump(2, 1e-5),
    fem.CoefficientField.jump(2, 1e5),
]


# ---------------------------------------------------------------- acceptance

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Record one pass/fail line per acceptance check; printed at the end."""
    def report(criterion, label, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] criterion {criterion}: {label}  {detail}".rstrip())
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

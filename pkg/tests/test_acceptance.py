"""Acceptance checks with their numeric thresholds.

Every check records a PASS/FAIL line shown in the terminal summary. The
large runs (n=4, m=16) take a couple of minutes and ~2.5 GB each.
"""
import gc

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from vertexdd import fem
from vertexdd.fem import CoefficientField, RhsMode
from vertexdd.harness import ExperimentConfig, run_experiment
from vertexdd.linalg import FactorCache, operator_matrix, pcg, submatrix
from vertexdd.precond import SubstructPrecond

from conftest import ALL_COEFFS

_RUNS = {}


def run(model, n, m, jump=None, choice=1):
    key = (model, n, m, jump, choice)
    if key not in _RUNS:
        kw = dict(model=model, n=n, m=m)
        if jump is not None:
            kw.update(case="jump", choice=choice, jump_in=(jump, jump))
        _RUNS[key] = run_experiment(ExperimentConfig(**kw))
        gc.collect()
    return _RUNS[key]


def within(measured, reference):
    return abs(measured - reference) <= max(5, 0.3 * reference)


# --------------------------------------------------- 1-4: reference counts

TABLE_CELLS = {
    1: ("elasticity", {(4, 4): 18, (8, 4): 20, (4, 6): 19, (8, 6): 20}),
    2: ("maxwell", {(4, 4): 16, (8, 4): 18, (4, 6): 16, (8, 6): 17}),
}


@pytest.mark.parametrize("crit,m,n", [(c, m, n) for c in (1, 2) for (m, n) in TABLE_CELLS[c][1]])
def test_smooth_table_counts(acceptance_report, crit, m, n):
    model, cells = TABLE_CELLS[crit]
    res = run(model, n, m)
    ref = cells[(m, n)]
    ok = res.converged and within(res.iterations, ref)
    acceptance_report(crit, f"{model} m={m} n={n}", ok, f"iters={res.iterations} reference={ref}")
    assert ok


JUMP_CELLS = [(3, "elasticity", 1e-5, 16), (3, "elasticity", 1e5, 25),
              (4, "maxwell", 1e-5, 14), (4, "maxwell", 1e5, 19)]


@pytest.mark.parametrize("crit,model,jump,ref", JUMP_CELLS)
def test_jump_counts(acceptance_report, crit, model, jump, ref):
    res = run(model, 4, 4, jump=jump)
    ok = res.converged and within(res.iterations, ref)
    acceptance_report(crit, f"{model} choice 1 jump={jump:g} m=4 n=4", ok,
                      f"iters={res.iterations} reference={ref}")
    assert ok


@pytest.mark.parametrize("model", ["elasticity", "maxwell"])
def test_jump_spread(acceptance_report, model):
    its = [run(model, 4, 4, jump=j).iterations for j in (1e-5, 1e5)] + [run(model, 4, 4).iterations]
    ok = max(its) - min(its) <= 12
    acceptance_report(3 if model == "elasticity" else 4, f"{model} spread over jumps 1e-5,1,1e5",
                      ok, f"iters={its}")
    assert ok


# ------------------------------------------------------------ 5: growth

FAMILIES = [("E-smooth", "elasticity", None), ("E-jump 1e-5", "elasticity", 1e-5),
            ("E-jump 1e5", "elasticity", 1e5), ("M-smooth", "maxwell", None),
            ("M-jump 1e-5", "maxwell", 1e-5), ("M-jump 1e5", "maxwell", 1e5)]


@pytest.mark.slow
@pytest.mark.parametrize("label,model,jump", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_growth_m4_to_m16(acceptance_report, label, model, jump):
    small = run(model, 4, 4, jump=jump)
    big = run(model, 4, 16, jump=jump)
    _RUNS.pop((model, 4, 16, jump, 1))
    growth = big.iterations - small.iterations
    ok = big.converged and growth <= 8 and max(small.ritz_max, big.ritz_max) <= 10
    acceptance_report(5, f"{label} n=4 m=4->16", ok,
                      f"iters {small.iterations}->{big.iterations} ritz_max={big.ritz_max:.3f}")
    assert ok


# -------------------------------------------------- 6: operator oracle

@pytest.mark.parametrize("model", ["elasticity", "maxwell"])
@pytest.mark.parametrize("coeffs", ALL_COEFFS, ids=["smooth", "c1-lo", "c1-hi", "c2-lo", "c2-hi"])
def test_operator_oracle(acceptance_report, system, model, coeffs):
    s = system(model, 2, 2, coeffs)
    A, pc = s["A"], s["pc"]
    B = operator_matrix(pc, A.shape[0])
    asym = np.abs(B - B.T).max() / np.abs(B).max()
    lam_min = np.linalg.eigvalsh(0.5 * (B + B.T)).min()
    b = fem.manufactured_rhs(model, s["mesh"], coeffs, s["dofmap"], RhsMode.ANALYTIC_F)
    x, rep = pcg(A, b, pc)
    xd = spla.spsolve(A.tocsc(), b)
    rel = np.linalg.norm(x - xd) / np.linalg.norm(xd)
    ok = asym <= 1e-10 and lam_min > 0 and rel <= 1e-5
    acceptance_report(6, f"{model} {coeffs.case.value} {coeffs.region_D.value} {coeffs.inside_values[0]:g}",
                      ok, f"asym={asym:.1e} lam_min={lam_min:.2e} err={rel:.1e}")
    assert ok


# ---------------------------------------- 7: discretization convergence

def test_energy_error_halves(acceptance_report):
    errs = []
    for m in (2, 4, 8):
        res = run_experiment(ExperimentConfig(model="elasticity", n=2, m=m, compute_errors=True))
        errs.append(res.energy_error)
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    ok = min(ratios) >= 1.8
    acceptance_report(7, "elasticity energy error ratios n=2 m=2,4,8", ok,
                      "ratios=" + ", ".join(f"{r:.3f}" for r in ratios))
    assert ok


# ---------------------------------------------------- 8: m=1 exactness

@pytest.mark.parametrize("model", ["elasticity", "maxwell"])
@pytest.mark.parametrize("n", [1, 2])
def test_exact_at_m1(acceptance_report, model, n):
    res = run_experiment(ExperimentConfig(model=model, n=n, m=1))
    ok = res.converged and res.iterations <= 2
    acceptance_report(8, f"{model} n={n} m=1", ok, f"iters={res.iterations}")
    assert ok


# ---------------------------------------------------- 9: invariant suite

def test_invariant_mesh(acceptance_report, hier):
    ok = True
    for n, m in ((2, 2), (2, 4), (3, 3)):
        hm, reg = hier(n, m)
        ct = hm.coarse.nodes[hm.coarse_tets[hm.tet_to_coarse_tet]]
        jac = np.swapaxes(ct[:, 1:] - ct[:, :1], 1, 2)
        lam = np.linalg.solve(jac[:, None], (hm.nodes[hm.tets] - ct[:, :1])[..., None])[..., 0]
        nested = (1 - lam.sum(-1)).min() >= -1e-12 and lam.min() >= -1e-12
        ft = hm.fine.face_tets
        conform = np.unique(np.sort(hm.fine.tet_faces.ravel()), return_counts=True)[1].max() == 2
        conform &= len(ft) == len(hm.fine.faces)
        vol = hm.fine.volumes()
        tiling = abs(vol.sum() - 1) < 1e-12
        ok &= bool(nested and conform and tiling)
    acceptance_report(9, "nestedness, conformity, volume tiling, covering", ok)
    assert ok


def test_invariant_galerkin(acceptance_report, hier):
    worst = 0.0
    for model in ("elasticity", "maxwell"):
        for m in (2, 3):
            hm, _ = hier(2, m)
            A = fem.assemble(model, hm, CoefficientField())
            P = fem.coarse_prolongation(model, hm)
            Ac = fem.assemble_coarse(model, hm, CoefficientField()).toarray()
            worst = max(worst, np.linalg.norm((P.T @ A @ P).toarray() - Ac) / np.linalg.norm(Ac))
    ok = worst <= 1e-10
    acceptance_report(9, "Galerkin consistency P^T A P", ok, f"rel={worst:.1e}")
    assert ok


def test_invariant_factor_roundtrip(acceptance_report, system):
    worst = 0.0
    rng = np.random.default_rng(0)
    for model in ("elasticity", "maxwell"):
        s = system(model, 2, 2)
        pc, A = s["pc"], s["A"]
        blocks = [(F, pc.interior[k]) for k, F in pc.F_interior.items()]
        blocks += [(F, pc.region_sets[v]) for v, F in pc.F_region.items()]
        for F, idx in blocks:
            X = rng.standard_normal((len(idx), 50))
            worst = max(worst, np.abs(F.solve(submatrix(A, idx, idx) @ X) - X).max() / np.abs(X).max())
    ok = worst <= 1e-10
    acceptance_report(9, "local factor roundtrips", ok, f"max err={worst:.1e}")
    assert ok


@pytest.mark.parametrize("n,m", [(2, 2), (2, 4), (4, 4)])
def test_invariant_linearity_symmetry(acceptance_report, system, n, m):
    worst_sym, worst_lin = 0.0, 0.0
    rng = np.random.default_rng(1)
    for model in ("elasticity", "maxwell"):
        pc = system(model, n, m)["pc"]
        worst_sym = max(worst_sym, pc.symmetry_defect(n_pairs=20))
        g1, g2 = rng.standard_normal((2, pc.n))
        ref = 3 * pc(g1) - 2 * pc(g2)
        worst_lin = max(worst_lin, np.linalg.norm(pc(3 * g1 - 2 * g2) - ref) / np.linalg.norm(ref))
    ok = worst_sym <= 1e-10 and worst_lin <= 1e-12
    acceptance_report(9, f"B^-1 symmetry/linearity n={n} m={m}", ok,
                      f"sym={worst_sym:.1e} lin={worst_lin:.1e}")
    assert ok


def test_invariant_harmonicity(acceptance_report, system):
    worst = 0.0
    rng = np.random.default_rng(2)
    for model in ("elasticity", "maxwell"):
        s = system(model, 2, 4)
        pc, A, dm = s["pc"], s["A"], s["dofmap"]
        u = pc.harmonic_extension(rng.standard_normal(dm.gamma_set.size))
        r = A @ u
        scale = spla.norm(A) * np.linalg.norm(u)
        worst = max(worst, max(np.linalg.norm(r[idx]) for idx in dm.interior_sets) / scale)
    ok = worst <= 1e-9
    acceptance_report(9, "harmonic extension residuals", ok, f"rel={worst:.1e}")
    assert ok


def test_invariant_lambda_max(acceptance_report):
    worst = 0.0
    for model in ("elasticity", "maxwell"):
        for n in (2, 4):
            for m in (2, 4, 8):
                worst = max(worst, run(model, n, m).ritz_max)
    ok = worst <= 10
    acceptance_report(9, "ritz_max bound over n in {2,4}, m in {2,4,8}", ok, f"max={worst:.3f}")
    assert ok

"""Lowest-order nodal (elasticity) and edge (curl-curl) finite elements.

Element kernels are exact. Assembly exploits the translation invariance of
the Kuhn mesh: every tet is a translate of one of six reference shapes, so
the element matrices are computed once per shape and scaled by the
piecewise-constant coefficients.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import LOCAL_EDGES, HierMesh, RegionIndex, TetMesh
from .quadrature import segment_rule, tet_rule


class Model(enum.Enum):
    ELASTICITY = "elasticity"
    MAXWELL = "maxwell"

    @classmethod
    def parse(cls, value) -> "Model":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class Case(enum.Enum):
    NO_JUMP = "nojump"
    JUMP = "jump"


class Choice(enum.Enum):
    ONE = 1
    TWO = 2


JUMP_BOXES = {
    Choice.ONE: [((0.25, 0.25, 0.25), (0.5, 0.5, 0.5))],
    Choice.TWO: [((0.25, 0.25, 0.25), (0.5, 0.5, 0.5)), ((0.5, 0.5, 0.5), (0.75, 0.75, 0.75))],
}


@dataclass(frozen=True)
class CoefficientField:
    """Piecewise-constant pair of coefficients, jumping inside a region D.

    The pair is ``(lambda, mu)`` for elasticity and ``(alpha, beta)`` for the
    curl-curl model; outside D both are 1.
    """

    case: Case = Case.NO_JUMP
    region_D: Choice = Choice.ONE
    inside_values: Tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if min(self.inside_values) <= 0:
            raise ValueError(f"coefficients must be positive, got {self.inside_values}")

    @classmethod
    def jump(cls, choice, value: float, value2: Optional[float] = None) -> "CoefficientField":
        v2 = value if value2 is None else value2
        return cls(Case.JUMP, Choice(int(getattr(choice, "value", choice))), (float(value), float(v2)))

    @property
    def has_jump(self) -> bool:
        return self.case is Case.JUMP and tuple(self.inside_values) != (1.0, 1.0)

    def in_D(self, points: np.ndarray) -> np.ndarray:
        inside = np.zeros(len(points), dtype=bool)
        for lo, hi in JUMP_BOXES[self.region_D]:
            inside |= ((points >= lo) & (points <= hi)).all(axis=1)
        return inside

    def per_tet(self, mesh: TetMesh) -> Tuple[np.ndarray, np.ndarray]:
        c1 = np.ones(mesh.n_tets)
        c2 = np.ones(mesh.n_tets)
        if self.case is Case.JUMP:
            bary = mesh.nodes[mesh.tets].mean(axis=1)
            inside = self.in_D(bary)
            c1[inside], c2[inside] = self.inside_values
        return c1, c2


# --------------------------------------------------------------------------
# element kernels

def _geometry(coords: np.ndarray):
    coords = np.asarray(coords, dtype=float)
    jac = (coords[..., 1:, :] - coords[..., :1, :])
    det = np.linalg.det(jac)
    scale = np.abs(coords[..., 1:, :] - coords[..., :1, :]).max(axis=(-1, -2))
    if np.any(np.abs(det) <= 1e-14 * scale**3):
        raise ValueError("degenerate tetrahedron")
    inv = np.linalg.inv(jac)
    # gradients of barycentric coordinates, rows = vertices
    g123 = np.swapaxes(inv, -1, -2)
    g0 = -g123.sum(axis=-2, keepdims=True)
    grads = np.concatenate([g0, g123], axis=-2)
    return grads, np.abs(det) / 6.0


def elasticity_parts(coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split the P1 elasticity matrix into its ``lambda`` and ``mu`` parts.

    Both are (..., 12, 12) with local dof ``3*a + i`` (vertex a, component i).
    """
    G, vol = _geometry(coords)
    v = vol[..., None, None, None, None]
    gg = np.einsum("...ak,...bk->...ab", G, G)
    eye = np.eye(3)
    Kmu = (gg[..., :, None, :, None] * eye[None, :, None, :]
           + np.einsum("...aj,...bi->...aibj", G, G)) * v
    Klam = np.einsum("...ai,...bj->...aibj", G, G) * v
    shape = Klam.shape[:-4] + (12, 12)
    return Klam.reshape(shape), Kmu.reshape(shape)


def element_matrix_elasticity(tet, lam: float, mu: float) -> np.ndarray:
    Klam, Kmu = elasticity_parts(np.asarray(tet, dtype=float))
    return lam * Klam + mu * Kmu


def maxwell_parts(coords: np.ndarray, signs=None) -> Tuple[np.ndarray, np.ndarray]:
    """Curl-curl and mass matrices (..., 6, 6) of the Whitney edge basis.

    Local edge ``e`` joins local vertices ``LOCAL_EDGES[e]``; ``signs[e] = -1``
    flips its basis function to the opposite orientation.
    """
    G, vol = _geometry(coords)
    i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    curl = 2.0 * np.cross(G[..., i, :], G[..., j, :])
    gg = np.einsum("...ak,...bk->...ab", G, G)
    # integral of lambda_p * lambda_q over the tet is vol*(1 + delta_pq)/20
    mm = (np.ones((4, 4)) + np.eye(4)) / 20.0
    I, J = i[:, None], j[:, None]
    K, L = i[None, :], j[None, :]
    M = (mm[I, K] * gg[..., J, L] - mm[I, L] * gg[..., J, K]
         - mm[J, K] * gg[..., I, L] + mm[J, L] * gg[..., I, K])
    M = M * vol[..., None, None]
    C = np.einsum("...ak,...bk->...ab", curl, curl) * vol[..., None, None]
    if signs is not None:
        s = np.asarray(signs, dtype=float)
        S = s[..., :, None] * s[..., None, :]
        C, M = C * S, M * S
    return C, M


def element_matrix_maxwell(tet, alpha: float, beta: float, signs=None) -> np.ndarray:
    C, M = maxwell_parts(np.asarray(tet, dtype=float), signs)
    return alpha * C + beta * M


def whitney_values(coords: np.ndarray, signs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Whitney basis values (npts, 6, 3) at barycentric points ``lam`` (npts, 4)."""
    G, _ = _geometry(coords)
    i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    w = lam[:, i, None] * G[None, j, :] - lam[:, j, None] * G[None, i, :]
    return w * np.asarray(signs, dtype=float)[None, :, None]


# --------------------------------------------------------------------------
# dofs

@dataclass
class DofMap:
    """Free-dof numbering of one model on one mesh, plus the index sets
    used by the substructuring preconditioner.

    Elasticity dofs are ``3*free_node + component``; curl-curl dofs are free
    edges. Entities on the boundary of the cube carry ``-1``.
    """

    model: Model
    n_dofs: int
    entity_dof: np.ndarray
    interior_sets: List[np.ndarray]
    gamma_set: np.ndarray
    region_sets: dict
    region_gamma_sets: dict

    def dofs_of(self, entities: np.ndarray) -> np.ndarray:
        ent = np.asarray(entities)
        base = self.entity_dof[ent]
        base = base[base >= 0]
        if self.model is Model.ELASTICITY:
            return np.sort((3 * base[:, None] + np.arange(3)).ravel())
        return np.sort(base)


def _free_numbering(mesh: TetMesh, model: Model) -> Tuple[np.ndarray, int]:
    bnd = mesh.boundary_nodes if model is Model.ELASTICITY else mesh.boundary_edges
    ent = np.full(len(bnd), -1, dtype=np.int64)
    ent[~bnd] = np.arange(int((~bnd).sum()))
    n_free = int((~bnd).sum())
    return ent, (3 * n_free if model is Model.ELASTICITY else n_free)


def build_dofmap(model, mesh: HierMesh, regions: Optional[RegionIndex] = None) -> DofMap:
    model = Model.parse(model)
    ent, n_dofs = _free_numbering(mesh.fine, model)
    dm = DofMap(model, n_dofs, ent, [], np.empty(0, dtype=np.int64), {}, {})
    if regions is None:
        return dm
    nodal = model is Model.ELASTICITY
    pick = (lambda a, b: a) if nodal else (lambda a, b: b)
    dm.interior_sets = [dm.dofs_of(pick(a, b))
                        for a, b in zip(regions.subdomain_nodes, regions.subdomain_edges)]
    dm.gamma_set = dm.dofs_of(pick(regions.gamma_nodes, regions.gamma_edges))
    for v in regions.vertex_regions:
        rs = dm.dofs_of(pick(regions.region_nodes[v], regions.region_edges[v]))
        dm.region_sets[v] = rs
        dm.region_gamma_sets[v] = np.intersect1d(rs, dm.gamma_set, assume_unique=True)
    return dm


def coarse_dofmap(model, mesh: HierMesh) -> DofMap:
    model = Model.parse(model)
    ent, n_dofs = _free_numbering(mesh.coarse, model)
    return DofMap(model, n_dofs, ent, [], np.empty(0, dtype=np.int64), {}, {})


# --------------------------------------------------------------------------
# assembly

def _reference_parts(model: Model, tm: TetMesh):
    """Element matrix parts of the six Kuhn shapes, taken from one tet each."""
    first = np.array([np.flatnonzero(tm.tet_type == p)[0] for p in range(6)])
    coords = tm.nodes[tm.tets[first]]
    if model is Model.ELASTICITY:
        return elasticity_parts(coords)
    return maxwell_parts(coords, tm.tet_edge_signs[first])


def assemble_on(model, tm: TetMesh, c1: np.ndarray, c2: np.ndarray,
                chunk: int = 100_000) -> sp.csr_matrix:
    """Assemble over the free dofs of ``tm`` with per-tet coefficients."""
    model = Model.parse(model)
    ent, n_dofs = _free_numbering(tm, model)
    P1, P2 = _reference_parts(model, tm)
    if model is Model.ELASTICITY:
        node = ent[tm.tets]
        loc = np.where(node[:, :, None] >= 0, 3 * node[:, :, None] + np.arange(3), -1).reshape(-1, 12)
    else:
        loc = ent[tm.tet_edges]
    nloc = loc.shape[1]
    A = sp.csr_matrix((n_dofs, n_dofs))
    if n_dofs == 0:
        return A
    for lo in range(0, tm.n_tets, chunk):
        sl = slice(lo, lo + chunk)
        t = tm.tet_type[sl]
        vals = c1[sl, None, None] * P1[t] + c2[sl, None, None] * P2[t]
        r = np.repeat(loc[sl], nloc, axis=1)
        c = np.tile(loc[sl], (1, nloc))
        keep = (r >= 0) & (c >= 0)
        A = A + sp.csr_matrix((vals.reshape(len(t), -1)[keep], (r[keep], c[keep])),
                              shape=(n_dofs, n_dofs))
    A.sort_indices()
    # element blocks are symmetric; enforce it bit-for-bit
    return symmetrize(A)


def symmetrize(A: sp.csr_matrix) -> sp.csr_matrix:
    U = sp.triu(A, format="csr")
    S = (U + sp.triu(A, k=1, format="csr").T).tocsr()
    S.sort_indices()
    return S


def assemble(model, mesh: HierMesh, coeffs: CoefficientField, dofmap: Optional[DofMap] = None) -> sp.csr_matrix:
    c1, c2 = coeffs.per_tet(mesh.fine)
    A = assemble_on(model, mesh.fine, c1, c2)
    if dofmap is not None and A.shape[0] != dofmap.n_dofs:
        raise ValueError(f"assembled {A.shape[0]} dofs, dofmap has {dofmap.n_dofs}")
    return A


def assemble_coarse(model, mesh: HierMesh, coeffs: CoefficientField) -> sp.csr_matrix:
    """Direct assembly on the coarse mesh; used to cross-check ``P.T @ A @ P``."""
    c1, c2 = coeffs.per_tet(mesh.coarse)
    return assemble_on(model, mesh.coarse, c1, c2)


# --------------------------------------------------------------------------
# coarse space

def _any_incident_tet(n_entities: int, incidence: np.ndarray) -> np.ndarray:
    out = np.empty(n_entities, dtype=np.int64)
    out[incidence.ravel()] = np.repeat(np.arange(len(incidence)), incidence.shape[1])
    return out


def _barycentric(coords: np.ndarray, points: np.ndarray) -> np.ndarray:
    jac = coords[:, 1:] - coords[:, :1]
    rhs = points - coords[:, 0]
    l123 = np.linalg.solve(np.swapaxes(jac, 1, 2), rhs[..., None])[..., 0]
    return np.concatenate([1 - l123.sum(axis=1, keepdims=True), l123], axis=1)


def coarse_prolongation(model, mesh: HierMesh, fine_dm: Optional[DofMap] = None,
                        coarse_dm: Optional[DofMap] = None) -> sp.csr_matrix:
    """Fine x coarse matrix whose columns are coarse basis functions in fine dofs."""
    model = Model.parse(model)
    fine, coarse = mesh.fine, mesh.coarse
    fine_dm = fine_dm or build_dofmap(model, mesh)
    coarse_dm = coarse_dm or coarse_dofmap(model, mesh)
    if model is Model.ELASTICITY:
        free = np.flatnonzero(fine_dm.entity_dof >= 0)
        ct = mesh.tet_to_coarse_tet[_any_incident_tet(fine.n_nodes, fine.tets)[free]]
        cverts = coarse.tets[ct]
        lam = _barycentric(coarse.nodes[cverts], fine.nodes[free])
        col_ent = coarse_dm.entity_dof[cverts]
        row_ent = fine_dm.entity_dof[free]
        r = np.repeat(row_ent, 4)
        c = col_ent.ravel()
        v = lam.ravel()
        ok = (c >= 0) & (np.abs(v) > 1e-12)
        r, c, v = r[ok], c[ok], v[ok]
        R = np.concatenate([3 * r + i for i in range(3)])
        C = np.concatenate([3 * c + i for i in range(3)])
        V = np.tile(v, 3)
    else:
        free = np.flatnonzero(fine_dm.entity_dof >= 0)
        ct = mesh.tet_to_coarse_tet[_any_incident_tet(fine.n_edges, fine.tet_edges)[free]]
        a, b = fine.nodes[fine.edges[free, 0]], fine.nodes[fine.edges[free, 1]]
        mid = 0.5 * (a + b)
        cverts = coarse.tets[ct]
        ccoords = coarse.nodes[cverts]
        lam = _barycentric(ccoords, mid)
        G, _ = _geometry(ccoords)
        i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
        w = lam[:, i, None] * G[:, j, :] - lam[:, j, None] * G[:, i, :]
        w = w * coarse.tet_edge_signs[ct][:, :, None]
        # Whitney functions are affine, so the midpoint rule is exact
        v = np.einsum("eck,ek->ec", w, b - a)
        c = coarse_dm.entity_dof[coarse.tet_edges[ct]]
        r = np.repeat(fine_dm.entity_dof[free], 6)
        c, v = c.ravel(), v.ravel()
        ok = (c >= 0) & (np.abs(v) > 1e-12)
        R, C, V = r[ok], c[ok], v[ok]
    P = sp.csr_matrix((V, (R, C)), shape=(fine_dm.n_dofs, coarse_dm.n_dofs))
    P.sum_duplicates()
    P.sort_indices()
    return P


# --------------------------------------------------------------------------
# manufactured solutions

class RhsMode(enum.Enum):
    INTERPOLANT_EXACT = "interpolant"
    ANALYTIC_F = "analytic"


def _bubble(x, y, z):
    return x * (x - 1) * y * (y - 1) * z * (z - 1)


def exact_solution(model, pts: np.ndarray) -> np.ndarray:
    """The manufactured fields of both test problems, shape (npts, 3)."""
    model = Model.parse(model)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    q = _bubble(x, y, z)
    if model is Model.ELASTICITY:
        return np.stack([q, q, q], axis=1)
    s = np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(np.pi * z)
    e = ((1 - np.exp(x)) * (1 - np.exp(x - 1)) * (1 - np.exp(y)) * (1 - np.exp(y - 1))
         * (1 - np.exp(z)) * (1 - np.exp(z - 1)))
    return np.stack([q, s, e], axis=1)


@lru_cache(maxsize=None)
def _symbolic_fields(model: Model):
    import sympy as sy

    x, y, z = sy.symbols("x y z")
    X = (x, y, z)
    q = x * (x - 1) * y * (y - 1) * z * (z - 1)
    if model is Model.ELASTICITY:
        u = [q, q, q]
        div = sum(sy.diff(u[i], X[i]) for i in range(3))
        eps = [[(sy.diff(u[i], X[j]) + sy.diff(u[j], X[i])) / 2 for j in range(3)] for i in range(3)]
        sigma = [[div * (1 if i == j else 0) + 2 * eps[i][j] for j in range(3)] for i in range(3)]
        f = [-sum(sy.diff(sigma[i][j], X[j]) for j in range(3)) for i in range(3)]
        grad = [[sy.diff(u[i], X[j]) for j in range(3)] for i in range(3)]
        return sy.lambdify(X, f, "numpy", cse=True), sy.lambdify(X, grad, "numpy", cse=True)
    u = [q, sy.sin(sy.pi * x) * sy.sin(sy.pi * y) * sy.sin(sy.pi * z),
         (1 - sy.exp(x)) * (1 - sy.exp(x - 1)) * (1 - sy.exp(y)) * (1 - sy.exp(y - 1))
         * (1 - sy.exp(z)) * (1 - sy.exp(z - 1))]

    def curl(w):
        return [sy.diff(w[2], y) - sy.diff(w[1], z),
                sy.diff(w[0], z) - sy.diff(w[2], x),
                sy.diff(w[1], x) - sy.diff(w[0], y)]

    cu = curl(u)
    f = [a + b for a, b in zip(curl(cu), u)]
    return sy.lambdify(X, f, "numpy", cse=True), sy.lambdify(X, cu, "numpy", cse=True)


def _eval_vec(fn, pts):
    vals = fn(pts[:, 0], pts[:, 1], pts[:, 2])
    return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (len(pts),)) for v in vals], axis=1)


def source_term(model, pts: np.ndarray) -> np.ndarray:
    """Right-hand side f of the PDE for the manufactured u, unit coefficients."""
    fn, _ = _symbolic_fields(Model.parse(model))
    return _eval_vec(fn, pts)


def interpolant(model, mesh: HierMesh, dofmap: DofMap) -> np.ndarray:
    """Fine-dof interpolant of the manufactured solution."""
    model = Model.parse(model)
    fine = mesh.fine
    x = np.zeros(dofmap.n_dofs)
    if model is Model.ELASTICITY:
        free = np.flatnonzero(dofmap.entity_dof >= 0)
        u = exact_solution(model, fine.nodes[free])
        for i in range(3):
            x[3 * dofmap.entity_dof[free] + i] = u[:, i]
        return x
    free = np.flatnonzero(dofmap.entity_dof >= 0)
    x[dofmap.entity_dof[free]] = edge_moments(model, fine.nodes[fine.edges[free, 0]],
                                              fine.nodes[fine.edges[free, 1]])
    return x


def edge_moments(model, a: np.ndarray, b: np.ndarray, q: int = 3) -> np.ndarray:
    """Moments of the exact field along segments a->b (3-point Gauss)."""
    t, w = segment_rule(q)
    tv = b - a
    out = np.zeros(len(a))
    for ti, wi in zip(t, w):
        out += wi * np.einsum("ek,ek->e", exact_solution(model, a + ti * tv), tv)
    return out


def manufactured_rhs(model, mesh: HierMesh, coeffs: CoefficientField, dofmap: DofMap,
                     mode=RhsMode.INTERPOLANT_EXACT, A: Optional[sp.spmatrix] = None) -> np.ndarray:
    model = Model.parse(model)
    mode = RhsMode(mode)
    if mode is RhsMode.INTERPOLANT_EXACT:
        if A is None:
            A = assemble(model, mesh, coeffs, dofmap)
        return A @ interpolant(model, mesh, dofmap)
    # f stays the one manufactured for unit coefficients, jumps or not
    return load_vector(model, mesh, dofmap)


def _tet_chunks(n_tets: int, chunk: int):
    for lo in range(0, n_tets, chunk):
        yield slice(lo, min(lo + chunk, n_tets))


def load_vector(model, mesh: HierMesh, dofmap: DofMap, q: int = 3, chunk: int = 20_000) -> np.ndarray:
    """b_i = integral of f . phi_i by the conical product rule."""
    model = Model.parse(model)
    fine = mesh.fine
    lam, w = tet_rule(q)
    b = np.zeros(dofmap.n_dofs)
    i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    for sl in _tet_chunks(fine.n_tets, chunk):
        X = fine.nodes[fine.tets[sl]]
        G, vol = _geometry(X)
        pts = np.einsum("qa,tak->tqk", lam, X).reshape(-1, 3)
        f = source_term(model, pts).reshape(len(X), len(w), 3)
        if model is Model.ELASTICITY:
            # phi = lambda_a e_i
            contrib = np.swapaxes(f, 1, 2) @ (w[:, None] * lam) * vol[:, None, None]
            contrib = np.swapaxes(contrib, 1, 2)
            ent = dofmap.entity_dof[fine.tets[sl]]
            ok = ent >= 0
            for c in range(3):
                b += np.bincount(3 * ent[ok] + c, weights=contrib[:, :, c][ok], minlength=dofmap.n_dofs)
            continue
        # phi_e = s_e (lambda_i grad lambda_j - lambda_j grad lambda_i)
        fg = f @ np.swapaxes(G, 1, 2)  # (tet, point, vertex)
        val = lam[None, :, i] * fg[:, :, j] - lam[None, :, j] * fg[:, :, i]
        contrib = (w @ val) * vol[:, None] * fine.tet_edge_signs[sl]
        ent = dofmap.entity_dof[fine.tet_edges[sl]]
        ok = ent >= 0
        b += np.bincount(ent[ok], weights=contrib[ok], minlength=dofmap.n_dofs)
    return b


def energy_error(model, mesh: HierMesh, dofmap: DofMap, x: np.ndarray, q: int = 6,
                 chunk: int = 5_000) -> Tuple[float, float]:
    """Energy-norm and L2 errors of the discrete field ``x`` against the exact
    solution, for unit coefficients."""
    model = Model.parse(model)
    fine = mesh.fine
    lam, w = tet_rule(q)
    _, dfn = _symbolic_fields(model)
    i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    en = l2 = 0.0
    for sl in _tet_chunks(fine.n_tets, chunk):
        X = fine.nodes[fine.tets[sl]]
        nt = len(X)
        G, vol = _geometry(X)
        pts = np.einsum("qa,tak->tqk", lam, X).reshape(-1, 3)
        u = exact_solution(model, pts).reshape(nt, len(w), 3)
        if model is Model.ELASTICITY:
            du = np.stack([_eval_vec(lambda a, b, c, r=r: dfn(a, b, c)[r], pts) for r in range(3)], axis=1)
            ent = dofmap.entity_dof[fine.tets[sl]]
            ok = ent >= 0
            uh_nodes = np.zeros((nt, 4, 3))
            for c in range(3):
                vals = np.zeros(ent.shape)
                vals[ok] = x[3 * ent[ok] + c]
                uh_nodes[:, :, c] = vals
            uh = np.einsum("qa,tai->tqi", lam, uh_nodes)
            grad_h = np.einsum("tai,tak->tik", uh_nodes, G)  # (tet, component, direction)
            e = du.reshape(nt, len(w), 3, 3) - grad_h[:, None]
            eps = 0.5 * (e + np.swapaxes(e, 2, 3))
            div = np.trace(e, axis1=2, axis2=3)
            dens = 2 * (eps**2).sum(axis=(2, 3)) + div**2
        else:
            du = _eval_vec(dfn, pts).reshape(nt, len(w), 3)
            ent = dofmap.entity_dof[fine.tet_edges[sl]]
            ok = ent >= 0
            coef = np.zeros(ent.shape)
            coef[ok] = x[ent[ok]]
            coef = coef * fine.tet_edge_signs[sl]
            uh = (np.einsum("te,qe,tek->tqk", coef, lam[:, i], G[:, j, :])
                  - np.einsum("te,qe,tek->tqk", coef, lam[:, j], G[:, i, :]))
            curl_h = 2 * np.einsum("te,tek->tk", coef, np.cross(G[:, i, :], G[:, j, :]))
            dens = ((du - curl_h[:, None]) ** 2).sum(axis=2) + ((u - uh) ** 2).sum(axis=2)
        en += np.einsum("q,tq,t->", w, dens, vol)
        l2 += np.einsum("q,tq,t->", w, ((u - uh) ** 2).sum(axis=2), vol)
    return float(np.sqrt(en)), float(np.sqrt(l2))


def write_matrix_market(path, A) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), symmetry="symmetric" if A.shape[0] == A.shape[1] else "general")


def write_vector_market(path, b) -> None:
    scipy.io.mmwrite(str(path), np.asarray(b).reshape(-1, 1))

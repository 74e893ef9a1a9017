"""Nested structured tetrahedral meshes of the unit cube.

The unit cube is split into ``n**3`` subdomain cubes of side ``d = 1/n``,
each of which is split into ``m**3`` fine cubes of side ``h = 1/(m*n)``.
Every cube, coarse or fine, is cut into the six Kuhn (Freudenthal)
tetrahedra, which makes the fine triangulation a refinement of the
coarse one.

Nodes live on an integer lattice; node ``(i, j, k)`` has index
``i + (N+1)*(j + (N+1)*k)`` and coordinates ``(i, j, k)/N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import permutations
from typing import Dict, TextIO

import numpy as np

# local vertex pairs of the six tet edges and the three vertices of each face
# (face f is opposite vertex f)
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
LOCAL_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])

KUHN_PERMS = tuple(permutations(range(3)))


def kuhn_offsets() -> np.ndarray:
    """Lattice offsets (6, 4, 3) of the Kuhn tetrahedra of the unit cube.

    Tet ``p`` walks from the origin to ``(1, 1, 1)`` along the axes in the
    order ``KUHN_PERMS[p]``; it is the set ``x[s0] >= x[s1] >= x[s2]``.
    """
    out = np.zeros((6, 4, 3), dtype=np.int64)
    for p, perm in enumerate(KUHN_PERMS):
        cur = np.zeros(3, dtype=np.int64)
        for step, axis in enumerate(perm, start=1):
            cur = cur.copy()
            cur[axis] = 1
            out[p, step] = cur
    return out


class TetMesh:
    """Kuhn triangulation of the ``N**3`` cube lattice on the unit cube.

    Tets are stored cube-major: tet ``6*c + p`` is Kuhn tet ``p`` of cube
    ``c = ci + N*(cj + N*ck)``.
    """

    def __init__(self, N: int):
        if N < 1:
            raise ValueError(f"lattice size must be positive, got {N}")
        self.N = N
        ax = np.arange(N + 1)
        k, j, i = np.meshgrid(ax, ax, ax, indexing="ij")
        self.ijk = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)
        self.nodes = self.ijk / N

        c = np.arange(N)
        ck, cj, ci = np.meshgrid(c, c, c, indexing="ij")
        corners = np.stack([ci.ravel(), cj.ravel(), ck.ravel()], axis=1)
        self.cube_ijk = corners
        lat = corners[:, None, None, :] + kuhn_offsets()[None]
        lat = lat.reshape(-1, 4, 3)
        self.tets = self.node_index(lat)
        self.tet_type = np.tile(np.arange(6), N**3)

        pairs = self.tets[:, LOCAL_EDGES]
        lo = pairs.min(axis=2)
        hi = pairs.max(axis=2)
        n_nodes = len(self.nodes)
        key = lo * n_nodes + hi
        ukey, inv = np.unique(key.ravel(), return_inverse=True)
        self.edges = np.stack([ukey // n_nodes, ukey % n_nodes], axis=1)
        self.tet_edges = inv.reshape(-1, 6)
        # +1 when the local edge runs from lower to higher global node index
        self.tet_edge_signs = np.where(pairs[:, :, 0] < pairs[:, :, 1], 1, -1).astype(np.int8)

    def node_index(self, ijk: np.ndarray) -> np.ndarray:
        M = self.N + 1
        ijk = np.asarray(ijk)
        return ijk[..., 0] + M * (ijk[..., 1] + M * ijk[..., 2])

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def faces(self) -> np.ndarray:
        return self._face_data[0]

    @cached_property
    def tet_faces(self) -> np.ndarray:
        return self._face_data[1]

    @cached_property
    def _face_data(self):
        tri = np.sort(self.tets[:, LOCAL_FACES], axis=2)
        nn = np.int64(self.n_nodes)
        key = (tri[:, :, 0] * nn + tri[:, :, 1]) * nn + tri[:, :, 2]
        ukey, inv = np.unique(key.ravel(), return_inverse=True)
        faces = np.stack([ukey // (nn * nn), (ukey // nn) % nn, ukey % nn], axis=1)
        return faces, inv.reshape(-1, 4)

    @cached_property
    def face_tets(self) -> np.ndarray:
        """(n_faces, 2) incident tets per face; second column -1 on the boundary."""
        flat = self.tet_faces.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=len(self.faces))
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        owner = order // 4
        out = np.full((len(self.faces), 2), -1, dtype=np.int64)
        out[:, 0] = owner[starts]
        two = counts == 2
        out[two, 1] = owner[starts[two] + 1]
        return out

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        on = ((self.ijk == 0) | (self.ijk == self.N)).any(axis=1)
        return on

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Edges contained in the boundary of the cube."""
        a = self.ijk[self.edges[:, 0]]
        b = self.ijk[self.edges[:, 1]]
        both = (a == b) & ((a == 0) | (a == self.N))
        return both.any(axis=1)

    @cached_property
    def node_degree(self) -> np.ndarray:
        return np.bincount(self.tets.ravel(), minlength=self.n_nodes)

    @cached_property
    def edge_degree(self) -> np.ndarray:
        return np.bincount(self.tet_edges.ravel(), minlength=self.n_edges)

    def volumes(self) -> np.ndarray:
        x = self.nodes[self.tets]
        jac = x[:, 1:] - x[:, :1]
        return np.abs(np.linalg.det(jac)) / 6.0

    def interior_entities(self, tet_ids: np.ndarray):
        """Nodes and edges whose incident tets all belong to ``tet_ids``.

        Entities on the boundary of the cube are excluded: these are exactly
        the nodes/edges not lying on the boundary of the union of the tets.
        """
        tet_ids = np.asarray(tet_ids)
        nodes, cnt = np.unique(self.tets[tet_ids].ravel(), return_counts=True)
        keep = (cnt == self.node_degree[nodes]) & ~self.boundary_nodes[nodes]
        edges, cnt = np.unique(self.tet_edges[tet_ids].ravel(), return_counts=True)
        ekeep = (cnt == self.edge_degree[edges]) & ~self.boundary_edges[edges]
        return nodes[keep], edges[ekeep]


class HierMesh:
    """Coarse ``n**3`` / fine ``(m*n)**3`` pair of nested Kuhn meshes."""

    def __init__(self, n: int, m: int):
        if n < 1 or m < 1:
            raise ValueError(f"n and m must be positive integers, got n={n}, m={m}")
        self.n = n
        self.m = m
        self.fine = TetMesh(m * n)
        self.coarse = TetMesh(n)

        sub = self.fine.cube_ijk // m
        cube_sub = sub[:, 0] + n * (sub[:, 1] + n * sub[:, 2])
        self.elem_subdomain = np.repeat(cube_sub, 6)

        # the barycenter of Kuhn tet p sits at offsets (3/4, 1/2, 1/4) along
        # its walk order; sorting its coarse-local coordinates picks the
        # unique coarse Kuhn tet that contains it
        loc = np.repeat(self.fine.cube_ijk - sub * m, 6, axis=0) * 4
        bary = np.zeros((6, 3), dtype=np.int64)
        for p, perm in enumerate(KUHN_PERMS):
            bary[p, list(perm)] = (3, 2, 1)
        key = loc + bary[self.fine.tet_type]
        order = np.argsort(-key, axis=1, kind="stable")
        perm_id = {perm: p for p, perm in enumerate(KUHN_PERMS)}
        code = order[:, 0] * 9 + order[:, 1] * 3 + order[:, 2]
        lut = np.full(27, -1, dtype=np.int64)
        for perm, p in perm_id.items():
            lut[perm[0] * 9 + perm[1] * 3 + perm[2]] = p
        self.tet_to_coarse_tet = 6 * np.repeat(cube_sub, 6) + lut[code]

    # flat aliases for the usual field names
    @property
    def d(self) -> float:
        return 1.0 / self.n

    @property
    def h(self) -> float:
        return 1.0 / (self.m * self.n)

    @property
    def nodes(self) -> np.ndarray:
        return self.fine.nodes

    @property
    def tets(self) -> np.ndarray:
        return self.fine.tets

    @property
    def edges(self) -> np.ndarray:
        return self.fine.edges

    @property
    def coarse_nodes(self) -> np.ndarray:
        return self.coarse.nodes

    @property
    def coarse_tets(self) -> np.ndarray:
        return self.coarse.tets

    @property
    def n_subdomains(self) -> int:
        return self.n**3

    def subdomain_tets(self, k: int) -> np.ndarray:
        # cube-major storage: the tets of subdomain k are not contiguous
        return np.flatnonzero(self.elem_subdomain == k)

    def coarse_node_fine_index(self) -> np.ndarray:
        """Fine-lattice node index of every coarse node."""
        return self.fine.node_index(self.coarse.ijk * self.m)

    def dump(self, fh: TextIO) -> None:
        """Plain-text dump: NODES / TETS / EDGES / SUBDOMAINS, 0-based."""
        fine = self.fine
        fh.write(f"NODES {fine.n_nodes}\n")
        np.savetxt(fh, fine.nodes, fmt="%.17g")
        fh.write(f"TETS {fine.n_tets}\n")
        np.savetxt(fh, fine.tets, fmt="%d")
        fh.write(f"EDGES {fine.n_edges}\n")
        np.savetxt(fh, fine.edges, fmt="%d")
        fh.write(f"SUBDOMAINS {fine.n_tets}\n")
        np.savetxt(fh, self.elem_subdomain, fmt="%d")


def build_hier_mesh(n: int, m: int) -> HierMesh:
    return HierMesh(n, m)


class CoveringError(RuntimeError):
    """Vertex regions fail to cover the interface; a construction bug."""


@dataclass
class RegionIndex:
    """Interface faces, vertex regions and their interior entities.

    ``vertex_regions[v]`` lists the fine tets with at least one vertex in the
    closed cube of side ``d`` centered at coarse node ``v``. Regions of
    boundary coarse nodes are clipped to the unit cube.
    """

    gamma_faces: np.ndarray
    gamma_nodes: np.ndarray
    gamma_edges: np.ndarray
    vertex_regions: Dict[int, np.ndarray]
    lambda_v: Dict[int, np.ndarray]
    region_nodes: Dict[int, np.ndarray] = field(repr=False)
    region_edges: Dict[int, np.ndarray] = field(repr=False)
    subdomain_nodes: list = field(repr=False)
    subdomain_edges: list = field(repr=False)


def region_tets(mesh: HierMesh, v: int) -> np.ndarray:
    """Fine tets touching the closed cube of side ``d`` around coarse node ``v``."""
    fine, m, N = mesh.fine, mesh.m, mesh.fine.N
    center = mesh.coarse.ijk[v] * m
    # integer test |i - c| <= m/2 is exact, no tolerance needed
    lo = np.maximum(center - m // 2, 0)
    hi = np.minimum(center + m // 2, N)
    # cubes whose corner range can reach the node box
    clo = np.maximum(lo - 1, 0)
    chi = np.minimum(hi, N - 1)
    r = [np.arange(clo[a], chi[a] + 1) for a in range(3)]
    ck, cj, ci = np.meshgrid(r[2], r[1], r[0], indexing="ij")
    cubes = (ci + N * (cj + N * ck)).ravel()
    cand = (6 * cubes[:, None] + np.arange(6)).ravel()
    lat = fine.ijk[fine.tets[cand]]
    inside = (np.abs(2 * (lat - center)) <= m).all(axis=2).any(axis=1)
    return cand[inside]


def classify_regions(mesh: HierMesh) -> RegionIndex:
    fine = mesh.fine
    ft = fine.face_tets
    inner = ft[:, 1] >= 0
    sub = mesh.elem_subdomain
    gamma_faces = np.flatnonzero(inner & (sub[ft[:, 0]] != sub[np.maximum(ft[:, 1], 0)]))

    gface_nodes = np.unique(fine.faces[gamma_faces].ravel())
    gamma_nodes = gface_nodes[~fine.boundary_nodes[gface_nodes]]
    # an edge is on the interface when it is an edge of an interface face
    tri = fine.faces[gamma_faces]
    nn = np.int64(fine.n_nodes)
    ekeys = np.concatenate([np.minimum(tri[:, a], tri[:, b]) * nn + np.maximum(tri[:, a], tri[:, b])
                            for a, b in ((0, 1), (0, 2), (1, 2))])
    all_keys = fine.edges[:, 0] * nn + fine.edges[:, 1]
    gedges = np.searchsorted(all_keys, np.unique(ekeys))
    gamma_edges = gedges[~fine.boundary_edges[gedges]]

    sub_nodes, sub_edges = [], []
    for k in range(mesh.n_subdomains):
        a, b = fine.interior_entities(mesh.subdomain_tets(k))
        sub_nodes.append(a)
        sub_edges.append(b)

    cn = mesh.coarse.ijk
    regions, lam, rnodes, redges = {}, {}, {}, {}
    n = mesh.n
    for v in range(mesh.coarse.n_nodes):
        tets = region_tets(mesh, v)
        regions[v] = tets
        rnodes[v], redges[v] = fine.interior_entities(tets)
        # subdomain cubes having v as a corner
        rng = [np.array([c for c in (cn[v, a] - 1, cn[v, a]) if 0 <= c < n]) for a in range(3)]
        kk, jj, ii = np.meshgrid(rng[2], rng[1], rng[0], indexing="ij")
        lam[v] = np.sort((ii + n * (jj + n * kk)).ravel())

    idx = RegionIndex(gamma_faces, gamma_nodes, gamma_edges, regions, lam,
                      rnodes, redges, sub_nodes, sub_edges)
    check_covering(mesh, idx)
    return idx


def check_covering(mesh: HierMesh, idx: RegionIndex) -> None:
    fine = mesh.fine
    hit_n = np.zeros(fine.n_nodes, dtype=bool)
    hit_e = np.zeros(fine.n_edges, dtype=bool)
    for v in idx.vertex_regions:
        hit_n[idx.region_nodes[v]] = True
        hit_e[idx.region_edges[v]] = True
    miss_n = idx.gamma_nodes[~hit_n[idx.gamma_nodes]]
    miss_e = idx.gamma_edges[~hit_e[idx.gamma_edges]]
    if len(miss_n) or len(miss_e):
        raise CoveringError(
            f"{len(miss_n)} interface nodes and {len(miss_e)} interface edges are "
            f"not interior to any vertex region (n={mesh.n}, m={mesh.m}); "
            f"first node {miss_n[:1].tolist()}, first edge {miss_e[:1].tolist()}")

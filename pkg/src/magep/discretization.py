"""Finite element spaces on a quadrilateral mesh.

Discontinuous Q1 nodes are numbered ``k = 4 * cell + l`` where ``l`` is the
local vertex. Continuous Q1 nodes are the mesh vertices. All geometric
factors are computed once; operator applications combine them with the
current coefficients on the fly.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import LOCAL_EDGES, REF_CORNERS, Mesh, shape_gradients, shape_values

_G = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
GAUSS_POINTS = np.array([[a, b] for b in _G for a in _G])
GAUSS_WEIGHTS = np.full(4, 0.25)


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class CouplingGraph:
    """Node-pair vectors ``c_ij`` of the dG skeleton.

    Each undirected pair (i, j) is stored once with both directed vectors.
    ``c_diag`` holds ``c_ii`` and ``c_boundary`` the vectors ``c_i^dD`` of
    the nodes listed in ``boundary_nodes``.
    """

    n_nodes: int
    edge_i: np.ndarray
    edge_j: np.ndarray
    c_ij: np.ndarray
    c_ji: np.ndarray
    c_diag: np.ndarray
    boundary_nodes: np.ndarray
    c_boundary: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.edge_i)

    def row_sums(self) -> np.ndarray:
        """sum_j c_ij + c_i^dD for every node (zero by consistency)."""
        s = self.c_diag.copy()
        np.add.at(s, self.edge_i, self.c_ij)
        np.add.at(s, self.edge_j, self.c_ji)
        np.add.at(s, self.boundary_nodes, self.c_boundary)
        return s

    def boundary_normals(self) -> np.ndarray:
        return self.c_boundary / np.linalg.norm(self.c_boundary, axis=1, keepdims=True)

    @functools.cached_property
    def edge_normals(self) -> np.ndarray:
        """Unit vectors n_ij = c_ij / |c_ij|."""
        return np.ascontiguousarray(self.c_ij / np.linalg.norm(self.c_ij, axis=1, keepdims=True))

    @functools.cached_property
    def edge_weights(self) -> np.ndarray:
        """max(|c_ij|, |c_ji|), the factor multiplying lambda in d_ij."""
        return np.maximum(np.linalg.norm(self.c_ij, axis=1), np.linalg.norm(self.c_ji, axis=1))

    def to_dense(self) -> np.ndarray:
        """(N, N, 2) array of all c_ij; only for small meshes."""
        c = np.zeros((self.n_nodes, self.n_nodes, 2))
        c[self.edge_i, self.edge_j] = self.c_ij
        c[self.edge_j, self.edge_i] = self.c_ji
        idx = np.arange(self.n_nodes)
        c[idx, idx] = self.c_diag
        return c


class Discretization:
    """Q1 dG space V_h and Q1 CG space H_h on one mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        nc = mesh.n_cells
        self.n_cells = nc
        self.n_dg = 4 * nc
        self.n_cg = mesh.n_vertices
        self.cells = mesh.cells
        self.dg_vertex = mesh.cells.ravel()
        self.dg_points = mesh.vertices[self.dg_vertex]

        xv = mesh.vertices[mesh.cells]  # (nc, 4, 2)
        self._quad = _physical_gradients(xv, GAUSS_POINTS)
        self._nodal = _physical_gradients(xv, REF_CORNERS)
        grad_q, det_q = self._quad
        self.quad_weights = det_q * GAUSS_WEIGHTS  # (nc, nq)
        self.quad_gradients = grad_q  # (nc, nq, 4, 2)
        self.node_gradients = self._nodal[0]  # (nc, node, basis, 2)

        phi_q = shape_values(GAUSS_POINTS)  # (nq, 4)
        self.masses = np.einsum("cq,ql->cl", self.quad_weights, phi_q).ravel()
        if np.any(self.masses <= 0.0):
            raise AssemblyError("non-positive lumped mass; mesh quality failure")
        self.stiffness_local = np.einsum(
            "cq,cqad,cqbd->cab", self.quad_weights, grad_q, grad_q
        )

        self.dirichlet = mesh.boundary_vertex.copy()
        self.free = np.flatnonzero(~self.dirichlet)
        self.constrained = np.flatnonzero(self.dirichlet)
        self._stiffness_matrix = None
        self._graph = None
        self._gradient_matrix = None
        self._gradient_matrix_t = None

    # ------------------------------------------------------------------ dG
    @property
    def area(self) -> float:
        return float(self.masses.sum())

    def lumped_inner_product(self, f: np.ndarray, g: np.ndarray) -> float:
        f = np.asarray(f)
        g = np.asarray(g)
        if f.shape != g.shape or f.shape[0] != self.n_dg:
            raise ValueError(f"layout mismatch: {f.shape} vs {g.shape}")
        prod = f * g
        if prod.ndim > 1:
            prod = prod.reshape(self.n_dg, -1).sum(axis=1)
        return float(self.masses @ prod)

    def lumped_norm(self, f: np.ndarray) -> float:
        return np.sqrt(self.lumped_inner_product(f, f))

    def nodal_interpolate(self, func) -> np.ndarray:
        """Collocate ``func`` at the dG support points.

        ``func`` is called with the (N, 2) point array and, if it accepts a
        second argument, the owning cell of every node; this allows functions
        that are only continuous per cell.
        """
        cell_of = np.repeat(np.arange(self.n_cells), 4)
        try:
            return np.asarray(func(self.dg_points, cell_of), dtype=float)
        except TypeError:
            return np.asarray(func(self.dg_points), dtype=float)

    def cell_values(self, f: np.ndarray) -> np.ndarray:
        return f.reshape(self.n_cells, 4, *f.shape[1:])

    def dg_gradient(self, f: np.ndarray) -> np.ndarray:
        """Cell-local gradient of a dG scalar at its own nodes, shape (N, 2)."""
        fc = f.reshape(self.n_cells, 4)
        return np.einsum("clbd,cb->cld", self.node_gradients, fc).reshape(-1, 2)

    def evaluate_dg(self, f: np.ndarray, ref_points: np.ndarray) -> np.ndarray:
        """Values of a dG field at reference points of every cell, (nc, npts, ...)."""
        phi = shape_values(ref_points)
        return np.einsum("pl,cl...->cp...", phi, self.cell_values(f))

    def map_points(self, ref_points: np.ndarray) -> np.ndarray:
        xv = self.mesh.vertices[self.cells]
        return np.einsum("pl,cld->cpd", shape_values(ref_points), xv)

    # ------------------------------------------------------------------ CG
    def stiffness_apply(self, phi: np.ndarray) -> np.ndarray:
        """Action of (grad phi, grad psi) for every CG test function."""
        return self.stiffness_matrix() @ phi

    def cg_gradient_at_dg_nodes(self, phi: np.ndarray) -> np.ndarray:
        """Gradient of phi_h restricted to each cell, at that cell's nodes, (N, 2)."""
        return (self.gradient_matrix @ phi).reshape(-1, 2)

    def dg_divergence_weak_form(self, w: np.ndarray, scaling=None) -> np.ndarray:
        """psi -> <scaling * w, grad psi>_h for every CG basis function psi."""
        mw = w * self.masses[:, None]
        if scaling is not None:
            mw = mw * np.asarray(scaling)[:, None]
        return self.gradient_matrix_t @ mw.ravel()

    # cell-local kernels; the sparse operators above are built from the same data
    def stiffness_apply_local(self, phi: np.ndarray) -> np.ndarray:
        local = np.einsum("cab,cb->ca", self.stiffness_local, phi[self.cells])
        return np.bincount(self.cells.ravel(), local.ravel(), minlength=self.n_cg)

    def cg_gradient_local(self, phi: np.ndarray) -> np.ndarray:
        return np.einsum("clbd,cb->cld", self.node_gradients, phi[self.cells]).reshape(-1, 2)

    def dg_divergence_local(self, w: np.ndarray, scaling=None) -> np.ndarray:
        mw = w * self.masses[:, None]
        if scaling is not None:
            mw = mw * np.asarray(scaling)[:, None]
        local = np.einsum("clbd,cld->cb", self.node_gradients, mw.reshape(self.n_cells, 4, 2))
        return np.bincount(self.cells.ravel(), local.ravel(), minlength=self.n_cg)

    @property
    def gradient_matrix(self) -> sp.csr_matrix:
        """(2N, n_cg) map from CG coefficients to cell-local nodal gradients."""
        if self._gradient_matrix is None:
            nc = self.n_cells
            rows = np.broadcast_to(
                np.arange(2 * self.n_dg).reshape(nc, 4, 1, 2), (nc, 4, 4, 2)
            ).transpose(0, 1, 3, 2)
            cols = np.broadcast_to(self.cells[:, None, None, :], (nc, 4, 2, 4))
            vals = self.node_gradients.transpose(0, 1, 3, 2)  # (c, l, d, b)
            self._gradient_matrix = sp.csr_matrix(
                (vals.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * self.n_dg, self.n_cg)
            )
            self._gradient_matrix_t = self._gradient_matrix.T.tocsr()
        return self._gradient_matrix

    @property
    def gradient_matrix_t(self) -> sp.csr_matrix:
        if self._gradient_matrix is None:
            self.gradient_matrix
        return self._gradient_matrix_t

    def lumped_cg_load(self, rho: np.ndarray) -> np.ndarray:
        """psi -> <rho, psi>_h for every CG basis function."""
        return np.bincount(self.dg_vertex, self.masses * rho, minlength=self.n_cg)

    def cg_to_dg(self, phi: np.ndarray) -> np.ndarray:
        return phi[self.dg_vertex]

    def stiffness_matrix(self) -> sp.csr_matrix:
        """Assembled CG stiffness matrix (all nodes, no constraints)."""
        if self._stiffness_matrix is None:
            self._stiffness_matrix = self._assemble(self.stiffness_local)
        return self._stiffness_matrix

    def weighted_gradient_matrix(self, node_tensor: np.ndarray) -> sp.csr_matrix:
        """Assemble (phi, psi) -> <M grad phi, grad psi>_h for per-node 2x2 tensors M."""
        mt = (node_tensor * self.masses[:, None, None]).reshape(self.n_cells, 4, 2, 2)
        local = np.einsum(
            "clad,clde,clbe->cab", self.node_gradients, mt, self.node_gradients
        )
        return self._assemble(local)

    def _assemble(self, local: np.ndarray) -> sp.csr_matrix:
        rows = np.repeat(self.cells, 4, axis=1).ravel()
        cols = np.tile(self.cells, (1, 4)).ravel()
        return sp.csr_matrix(
            (local.ravel(), (rows, cols)), shape=(self.n_cg, self.n_cg)
        )

    def consistent_mass_norm(self, f: np.ndarray) -> float:
        """Exact L2 norm of a dG field (vector fields summed componentwise)."""
        phi = shape_values(GAUSS_POINTS)
        vals = np.einsum("ql,cl...->cq...", phi, self.cell_values(f))
        sq = vals**2
        if sq.ndim > 2:
            sq = sq.reshape(self.n_cells, len(GAUSS_WEIGHTS), -1).sum(axis=2)
        return float(np.sqrt(np.sum(self.quad_weights * sq)))

    # --------------------------------------------------------------- graph
    @property
    def graph(self) -> CouplingGraph:
        if self._graph is None:
            self._graph = assemble_coupling_graph(self)
        return self._graph


def _physical_gradients(xv: np.ndarray, ref: np.ndarray):
    """Physical gradients of the 4 basis functions and det J at reference points."""
    dN = shape_gradients(ref)  # (np, 4, 2)
    jac = np.einsum("cld,pls->cpds", xv, dN)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if np.any(det <= 0.0):
        raise AssemblyError("non-positive Jacobian determinant")
    inv = np.empty_like(jac)
    inv[..., 0, 0] = jac[..., 1, 1] / det
    inv[..., 1, 1] = jac[..., 0, 0] / det
    inv[..., 0, 1] = -jac[..., 0, 1] / det
    inv[..., 1, 0] = -jac[..., 1, 0] / det
    # grad_x phi_l = inv(J)^T grad_ref phi_l
    grad = np.einsum("cpsd,pls->cpld", inv, dN)
    return grad, det


def _face_mass_1d() -> np.ndarray:
    """[[int phi_a phi_a, int phi_a phi_b], ...] on a unit-length face by 2-point Gauss."""
    s = _G
    phi = np.stack([1.0 - s, s])  # (2 basis, 2 points)
    return 0.5 * phi @ phi.T


def assemble_coupling_graph(disc: Discretization, tol: float = 1e-12) -> CouplingGraph:
    """Central-flux dG skeleton vectors c_ij, c_i^dD.

    Same cell:   c_ij = -int_K grad phi_i phi_j + 1/2 sum_F int_F phi_i phi_j n_K
    Across F:    c_ij = 1/2 int_F phi_i phi_j' n_K
    Boundary:    c_i^dD = 1/2 int_{dK cap dD} phi_i n
    """
    mesh = disc.mesh
    nc = disc.n_cells
    phi_q = shape_values(GAUSS_POINTS)
    volume = -np.einsum("cq,cqid,qj->cijd", disc.quad_weights, disc.quad_gradients, phi_q)

    xv = mesh.vertices[mesh.cells]
    tangent = xv[:, LOCAL_EDGES[:, 1]] - xv[:, LOCAL_EDGES[:, 0]]  # (nc, 4, 2)
    nL = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)  # outward normal * length
    fm = _face_mass_1d()
    cmat = volume.copy()
    for e, (a, b) in enumerate(LOCAL_EDGES):
        for ia, ii in enumerate((a, b)):
            for ja, jj in enumerate((a, b)):
                cmat[:, ii, jj] += 0.5 * fm[ia, ja] * nL[:, e]

    la, lb = np.triu_indices(4, k=1)
    base = 4 * np.arange(nc)[:, None]
    ei = [(base + la).ravel()]
    ej = [(base + lb).ravel()]
    cij = [cmat[:, la, lb].reshape(-1, 2)]
    cji = [cmat[:, lb, la].reshape(-1, 2)]
    c_diag = cmat[:, np.arange(4), np.arange(4)].reshape(-1, 2)

    fi = mesh.interior_faces
    K, Kp = mesh.face_cells[fi, 0], mesh.face_cells[fi, 1]
    e, ep = mesh.face_local[fi, 0], mesh.face_local[fi, 1]
    nK = nL[K, e]
    nKp = nL[Kp, ep]
    for s_a in (0, 1):
        loc_i = LOCAL_EDGES[e, s_a]
        vi = mesh.cells[K, loc_i]
        for s_b in (0, 1):
            loc_j = LOCAL_EDGES[ep, s_b]
            vj = mesh.cells[Kp, loc_j]
            w = np.where(vi == vj, fm[0, 0], fm[0, 1])[:, None]
            ei.append(4 * K + loc_i)
            ej.append(4 * Kp + loc_j)
            cij.append(0.5 * w * nK)
            cji.append(0.5 * w * nKp)

    bfaces = mesh.boundary_faces
    Kb, eb = mesh.face_cells[bfaces, 0], mesh.face_local[bfaces, 0]
    bnodes = np.concatenate([4 * Kb + LOCAL_EDGES[eb, 0], 4 * Kb + LOCAL_EDGES[eb, 1]])
    half = fm[0].sum()
    bvec = np.concatenate([0.5 * half * nL[Kb, eb]] * 2)
    uniq, inv = np.unique(bnodes, return_inverse=True)
    c_bnd = np.zeros((len(uniq), 2))
    np.add.at(c_bnd, inv, bvec)

    graph = CouplingGraph(
        n_nodes=disc.n_dg,
        edge_i=np.concatenate(ei).astype(np.int64),
        edge_j=np.concatenate(ej).astype(np.int64),
        c_ij=np.ascontiguousarray(np.concatenate(cij)),
        c_ji=np.ascontiguousarray(np.concatenate(cji)),
        c_diag=c_diag,
        boundary_nodes=uniq.astype(np.int64),
        c_boundary=c_bnd,
    )
    scale = max(1.0, float(np.abs(graph.c_ij).max()))
    if np.abs(graph.c_ij + graph.c_ji).max() > tol * scale:
        raise AssemblyError("c_ij is not skew-symmetric")
    if np.abs(graph.row_sums()).max() > tol * scale:
        raise AssemblyError("c_ij rows are not consistent")
    return graph

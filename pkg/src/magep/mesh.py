"""Conforming quadrilateral meshes: rectangles and disks.

Cells store four vertex indices in counterclockwise order. Local vertex
``l`` of a cell is the image of the reference corner ``REF_CORNERS[l]``
under the bilinear map of that cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REF_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

# local edge e runs from local vertex e to local vertex (e + 1) % 4
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Immutable quadrilateral mesh.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 4) int array, counterclockwise
    face_vertices : (nf, 2) int array
    face_cells : (nf, 2) int array; second entry is -1 on the boundary
    face_local : (nf, 2) int array; local edge index in each cell (-1 if none)
    boundary_vertex : (nv,) bool array
    refinement_level : int
    kind : "rectangle" or "disk"
    radius : disk radius (0 for rectangles)
    """

    vertices: np.ndarray
    cells: np.ndarray
    face_vertices: np.ndarray
    face_cells: np.ndarray
    face_local: np.ndarray
    boundary_vertex: np.ndarray
    refinement_level: int = 0
    kind: str = "rectangle"
    radius: float = 0.0
    cell_edges: np.ndarray = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.face_vertices)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] >= 0)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    def cell_mapping(self, cell: int) -> "CellMapping":
        return CellMapping(self.vertices[self.cells[cell]])

    def jacobian_determinants(self, points: np.ndarray = REF_CORNERS) -> np.ndarray:
        """det(DT_K) for every cell at the given reference points, shape (nc, npts)."""
        xv = self.vertices[self.cells]  # (nc, 4, 2)
        dN = _shape_gradients(points)  # (npts, 4, 2)
        jac = np.einsum("cld,pls->cpds", xv, dN)
        return jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]

    def cell_areas(self) -> np.ndarray:
        g = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
        pts = np.array([[a, b] for b in g for a in g])
        return 0.25 * self.jacobian_determinants(pts).sum(axis=1)

    def area(self) -> float:
        return float(self.cell_areas().sum())

    def check(self) -> None:
        """Raise MeshError if a structural invariant is violated."""
        if np.any(self.jacobian_determinants() <= 0.0):
            raise MeshError("non-positive Jacobian at a cell vertex")
        counts = np.bincount(self.cell_edges.ravel(), minlength=self.n_faces)
        interior = self.face_cells[:, 1] >= 0
        if np.any(counts[interior] != 2) or np.any(counts[~interior] != 1):
            raise MeshError("face not shared by exactly two cells")
        if self.kind == "disk":
            r = np.linalg.norm(self.vertices[self.boundary_vertex], axis=1)
            if np.any(np.abs(r - self.radius) > 1e-12 * self.radius):
                raise MeshError("boundary vertex off the circle")


@dataclass(frozen=True)
class CellMapping:
    """Bilinear map from the unit square onto one cell."""

    corners: np.ndarray

    def __call__(self, ref: np.ndarray) -> np.ndarray:
        ref = np.atleast_2d(ref)
        return _shape_values(ref) @ self.corners

    def jacobian(self, ref: np.ndarray) -> np.ndarray:
        ref = np.atleast_2d(ref)
        return np.einsum("ld,pls->pds", self.corners, _shape_gradients(ref))

    def inverse(self, x: np.ndarray, tol: float = 1e-12, maxiter: int = 50) -> np.ndarray:
        """Reference coordinates of physical point ``x`` by Newton iteration."""
        xi = np.array([0.5, 0.5])
        for _ in range(maxiter):
            r = self(xi)[0] - x
            step = np.linalg.solve(self.jacobian(xi)[0], r)
            xi = xi - step
            if np.linalg.norm(step) < tol:
                break
        return xi


def _shape_values(ref: np.ndarray) -> np.ndarray:
    """Q1 shape functions at reference points, shape (npts, 4)."""
    s, t = ref[:, 0], ref[:, 1]
    return np.stack([(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t], axis=1)


def _shape_gradients(ref: np.ndarray) -> np.ndarray:
    """Reference gradients of the Q1 shape functions, shape (npts, 4, 2)."""
    s, t = ref[:, 0], ref[:, 1]
    ds = np.stack([-(1 - t), 1 - t, t, -t], axis=1)
    dt = np.stack([-(1 - s), -s, s, 1 - s], axis=1)
    return np.stack([ds, dt], axis=2)


def shape_values(ref):
    return _shape_values(np.atleast_2d(ref))


def shape_gradients(ref):
    return _shape_gradients(np.atleast_2d(ref))


def _finalize(vertices, cells, level, kind, radius) -> Mesh:
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    nc = len(cells)
    edges = np.sort(cells[:, LOCAL_EDGES].reshape(-1, 2), axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(nc, 4)
    nf = len(uniq)

    face_cells = -np.ones((nf, 2), dtype=np.int64)
    face_local = -np.ones((nf, 2), dtype=np.int64)
    flat = inverse.ravel()
    owner = np.repeat(np.arange(nc), 4)
    local = np.tile(np.arange(4), nc)
    order = np.argsort(flat, kind="stable")
    f_sorted = flat[order]
    first = np.ones(len(f_sorted), dtype=bool)
    first[1:] = f_sorted[1:] != f_sorted[:-1]
    face_cells[f_sorted[first], 0] = owner[order][first]
    face_local[f_sorted[first], 0] = local[order][first]
    second = ~first
    face_cells[f_sorted[second], 1] = owner[order][second]
    face_local[f_sorted[second], 1] = local[order][second]

    boundary_vertex = np.zeros(len(vertices), dtype=bool)
    bf = face_cells[:, 1] < 0
    boundary_vertex[uniq[bf].ravel()] = True

    mesh = Mesh(
        vertices=np.ascontiguousarray(vertices, dtype=float),
        cells=cells,
        face_vertices=uniq,
        face_cells=face_cells,
        face_local=face_local,
        boundary_vertex=boundary_vertex,
        refinement_level=level,
        kind=kind,
        radius=float(radius),
        cell_edges=inverse,
    )
    return mesh


def build_rectangle_mesh(bounds, subdivisions) -> Mesh:
    """Uniform Cartesian mesh of ``nx * ny`` cells.

    Parameters
    ----------
    bounds : ((x0, x1), (y0, y1))
    subdivisions : (nx, ny)
    """
    (x0, x1), (y0, y1) = bounds
    nx, ny = (int(n) for n in subdivisions)
    if nx < 1 or ny < 1:
        raise MeshError(f"subdivisions must be >= 1, got {subdivisions}")
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate bounds {bounds}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v0 = (j * (nx + 1) + i).ravel()
    cells = np.column_stack([v0, v0 + 1, v0 + nx + 2, v0 + nx + 1])
    return _finalize(vertices, cells, 0, "rectangle", 0.0)


def _coarse_disk(R: float):
    a = 0.4 * R
    # 3x3 central lattice
    block = np.array(
        [[-a, -a], [0, -a], [a, -a], [-a, 0], [0, 0], [a, 0], [-a, a], [0, a], [a, a]],
        dtype=float,
    )
    # block boundary loop, counterclockwise starting at angle 0
    loop = [5, 8, 7, 6, 3, 0, 1, 2]
    angles = np.arctan2(block[loop, 1], block[loop, 0])
    rim = R * np.column_stack([np.cos(angles), np.sin(angles)])
    vertices = np.vstack([block, rim])
    cells = [[0, 1, 4, 3], [1, 2, 5, 4], [3, 4, 7, 6], [4, 5, 8, 7]]
    for k in range(8):
        a_in, b_in = loop[k], loop[(k + 1) % 8]
        a_out, b_out = 9 + k, 9 + (k + 1) % 8
        cells.append([a_in, a_out, b_out, b_in])
    return vertices, np.array(cells)


def build_disk_mesh(R: float, refinement: int) -> Mesh:
    """Disk of radius ``R``: 12 coarse cells refined ``refinement`` times.

    The coarse mesh is a 2x2 block of squares surrounded by an 8-cell ring.
    """
    if not R > 0:
        raise MeshError(f"radius must be positive, got {R}")
    if refinement < 0:
        raise MeshError(f"refinement must be >= 0, got {refinement}")
    vertices, cells = _coarse_disk(float(R))
    mesh = _finalize(vertices, cells, 0, "disk", R)
    for _ in range(refinement):
        mesh = refine_globally(mesh)
    return mesh


def disk_dofs_per_component(refinement: int) -> int:
    """dim V_h of the Q1 dG space on the refined 12-cell disk."""
    return 4 * 12 * 4**refinement


def refine_globally(mesh: Mesh) -> Mesh:
    """Split every quadrilateral into four.

    New boundary vertices of a disk mesh are placed on the circle; the new
    center vertex of each cell is the mean of its four (projected) edge
    midpoints, which pulls boundary cells outward along with their rim.
    """
    nv, nf = mesh.n_vertices, mesh.n_faces
    fv = mesh.face_vertices
    mid = 0.5 * (mesh.vertices[fv[:, 0]] + mesh.vertices[fv[:, 1]])
    if mesh.kind == "disk":
        bf = mesh.face_cells[:, 1] < 0
        r = np.linalg.norm(mid[bf], axis=1, keepdims=True)
        mid[bf] *= mesh.radius / r
    ce = mesh.cell_edges
    center = mid[ce].mean(axis=1)
    vertices = np.vstack([mesh.vertices, mid, center])

    c = mesh.cells
    e = nv + ce  # edge-midpoint vertex ids (nc, 4)
    m = nv + nf + np.arange(mesh.n_cells)
    children = np.stack(
        [
            np.column_stack([c[:, 0], e[:, 0], m, e[:, 3]]),
            np.column_stack([e[:, 0], c[:, 1], e[:, 1], m]),
            np.column_stack([m, e[:, 1], c[:, 2], e[:, 2]]),
            np.column_stack([e[:, 3], m, e[:, 2], c[:, 3]]),
        ],
        axis=1,
    ).reshape(-1, 4)
    return _finalize(vertices, children, mesh.refinement_level + 1, mesh.kind, mesh.radius)

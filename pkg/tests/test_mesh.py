import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magep.mesh import (
    REF_CORNERS,
    CellMapping,
    MeshError,
    build_disk_mesh,
    build_rectangle_mesh,
    disk_dofs_per_component,
    refine_globally,
)


def test_single_cell_rectangle():
    m = build_rectangle_mesh(((0, 1), (0, 1)), (1, 1))
    assert m.n_cells == 1 and m.n_vertices == 4
    m.check()


def test_two_cell_rectangle_counts():
    m = build_rectangle_mesh(((0, 2), (0, 1)), (2, 1))
    assert m.n_cells == 2 and m.n_vertices == 6
    assert len(m.interior_faces) == 1


@pytest.mark.parametrize("sub", [(0, 1), (1, 0), (-2, 3)])
def test_rectangle_rejects_bad_subdivisions(sub):
    with pytest.raises(MeshError):
        build_rectangle_mesh(((0, 1), (0, 1)), sub)


@pytest.mark.parametrize("r, dofs", [(5, 4096), (6, 16384), (7, 65536), (8, 262144)])
def test_vortex_grid_dof_column(r, dofs):
    n = 2**r
    m = build_rectangle_mesh(((-5, 5), (-5, 5)), (n, n))
    assert 4 * m.n_cells == dofs


def test_disk_dof_counts():
    assert disk_dofs_per_component(6) == 196_608
    assert disk_dofs_per_component(9) == 12_582_912
    assert 4 * build_disk_mesh(16.0, 3).n_cells == disk_dofs_per_component(3)


def test_coarse_disk_invariants():
    m = build_disk_mesh(1.0, 0)
    assert m.n_cells == 12
    assert np.all(m.jacobian_determinants() > 0)
    r = np.linalg.norm(m.vertices[m.boundary_vertex], axis=1)
    assert np.allclose(r, 1.0, rtol=0, atol=1e-12)
    m.check()


def test_disk_rejects_bad_radius():
    with pytest.raises(MeshError):
        build_disk_mesh(0.0, 1)
    with pytest.raises(MeshError):
        build_disk_mesh(1.0, -1)


def test_refinement_counts():
    d = build_disk_mesh(2.0, 0)
    assert refine_globally(d).n_cells == 48
    sq = build_rectangle_mesh(((0, 1), (0, 1)), (1, 1))
    one = refine_globally(sq)
    assert one.n_cells == 4 and one.n_vertices == 9
    assert refine_globally(one).n_cells == 16 * sq.n_cells


@pytest.mark.parametrize("level", range(0, 5))
def test_disk_invariants_under_refinement(level):
    m = build_disk_mesh(16.0, level)
    m.check()
    r = np.linalg.norm(m.vertices[m.boundary_vertex], axis=1)
    assert np.all(np.abs(r - 16.0) <= 1e-12 * 16.0)
    # Jacobians positive at the 2x2 Gauss points used downstream
    g = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
    pts = np.array([[a, b] for b in g for a in g])
    assert np.all(m.jacobian_determinants(pts) > 0)


def test_conformity_interior_faces_share_endpoints():
    m = build_disk_mesh(3.0, 2)
    for f in m.interior_faces:
        k0, k1 = m.face_cells[f]
        e0, e1 = m.face_local[f]
        a = set(m.cells[k0, [e0, (e0 + 1) % 4]])
        b = set(m.cells[k1, [e1, (e1 + 1) % 4]])
        assert a == b == set(m.face_vertices[f])


def test_disk_area_converges_second_order():
    R = 16.0
    errs = [abs(build_disk_mesh(R, r).area() - np.pi * R * R) for r in range(1, 6)]
    ratios = [errs[k] / errs[k + 1] for k in range(len(errs) - 1)]
    assert all(q >= 3.5 for q in ratios), ratios


def test_cell_mapping_corners_exact():
    m = build_disk_mesh(5.0, 1)
    for k in range(m.n_cells):
        cm = m.cell_mapping(k)
        np.testing.assert_array_equal(cm(REF_CORNERS), m.vertices[m.cells[k]])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.integers(0, 47))
def test_cell_mapping_inverse_roundtrip(xi, eta, cell):
    m = build_disk_mesh(4.0, 1)
    cm = m.cell_mapping(cell)
    x = cm(np.array([xi, eta]))[0]
    np.testing.assert_allclose(cm.inverse(x), [xi, eta], atol=1e-11)

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magep.discretization import Discretization
from magep.eos import CovolumeEOS, IsothermalEOS
from magep.hyperbolic import (
    DirichletBoundary,
    HyperbolicSolver,
    ReflectiveBoundary,
    bar_states,
    cfl_timestep,
    compute_graph_viscosities,
    entropy_tally,
    forward_euler_step,
    max_wavespeed_barotropic,
    max_wavespeed_covolume,
    ssp_rk3_step,
)
from magep.mesh import build_disk_mesh, build_rectangle_mesh
from oracles import exact_max_wavespeed

E1 = np.array([[1.0, 0.0]])


def prim(eos, rho, vx, p):
    return eos.from_primitive(rho, [[vx, 0.0]], p)


def random_covolume_field(disc, eos, rng, amp=1.0):
    n = disc.n_dg
    rho = rng.uniform(0.2, 2.0, n)
    v = amp * rng.uniform(-1, 1, (n, 2))
    p = rng.uniform(0.2, 2.0, n)
    return eos.from_primitive(rho, v, p)


def random_isothermal_field(disc, rng):
    n = disc.n_dg
    rho = rng.uniform(0.2, 2.0, n)
    return np.column_stack([rho, rho[:, None] * rng.uniform(-1, 1, (n, 2))])


# ------------------------------------------------------------ wavespeeds
def test_equal_states_at_rest_give_sound_speed():
    eos = CovolumeEOS(1.4)
    u = prim(eos, 1.3, 0.0, 0.7)
    lam = max_wavespeed_covolume(u, u, E1, eos)[0]
    assert lam == pytest.approx(np.sqrt(1.4 * 0.7 / 1.3), rel=1e-14)


def test_uniform_supersonic_flow():
    eos = CovolumeEOS(1.4)
    c = np.sqrt(1.4)
    u = prim(eos, 1.0, 3.0, 1.0)
    assert max_wavespeed_covolume(u, u, E1, eos)[0] == pytest.approx(3.0 + c, rel=1e-14)


def test_sod_bound_exceeds_exact_wavespeed():
    eos = CovolumeEOS(1.4)
    lam = max_wavespeed_covolume(prim(eos, 1, 0, 1), prim(eos, 0.125, 0, 0.1), E1, eos)[0]
    exact = exact_max_wavespeed((1.0, 0.0, 1.0), (0.125, 0.0, 0.1), 1.4)
    assert exact == pytest.approx(1.7522, abs=1e-4)
    assert lam >= exact


@settings(max_examples=200, deadline=None)
@given(
    st.floats(1.01, 5 / 3), st.floats(0.0, 0.9),
    st.floats(0.05, 5), st.floats(-3, 3), st.floats(0.01, 10),
    st.floats(0.05, 5), st.floats(-3, 3), st.floats(0.01, 10),
)
def test_two_rarefaction_bound_is_an_upper_bound(gamma, bfrac, rl, ul, pl, rr, ur, pr):
    b = bfrac / max(rl, rr)
    eos = CovolumeEOS(gamma, b)
    lam = max_wavespeed_covolume(prim(eos, rl, ul, pl), prim(eos, rr, ur, pr), E1, eos)[0]
    exact = exact_max_wavespeed((rl, ul, pl), (rr, ur, pr), gamma, b)
    assert lam >= exact * (1.0 - 1e-12)


def test_barotropic_wavespeed_examples():
    eos = IsothermalEOS(1.0)
    u = np.array([[2.0, 0.0, 0.0]])
    assert max_wavespeed_barotropic(u, u, E1, eos)[0] == 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cold = IsothermalEOS(0.0)
    lam = max_wavespeed_barotropic(np.array([[1.0, 2.0, 0]]), np.array([[1.0, -3.0, 0]]), E1, cold)
    assert lam[0] == 3.0


@settings(max_examples=100)
@given(st.floats(0.01, 5), st.floats(-5, 5), st.floats(0.01, 5), st.floats(-5, 5), st.floats(0, 2))
def test_barotropic_bound_dominates_velocities(rl, ml, rr, mr, theta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        eos = IsothermalEOS(theta)
    lam = max_wavespeed_barotropic(np.array([[rl, ml, 0]]), np.array([[rr, mr, 0]]), E1, eos)[0]
    assert lam >= max(abs(ml / rl), abs(mr / rr))


# ------------------------------------------------------------ viscosities
def test_rest_state_viscosities():
    d = Discretization(build_disk_mesh(1.0, 1))
    u = np.column_stack([np.full(d.n_dg, 1.5), np.zeros((d.n_dg, 2))])
    visc = compute_graph_viscosities(u, HyperbolicSolver(d, IsothermalEOS(1.0)))
    g = d.graph
    np.testing.assert_allclose(visc.edge, np.linalg.norm(g.c_ij, axis=1), rtol=1e-14)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cold = HyperbolicSolver(d, IsothermalEOS(0.0))
    assert not compute_graph_viscosities(u, cold).edge.any()


def test_viscosities_symmetric_and_diagonal_consistent():
    d = Discretization(build_disk_mesh(1.0, 2))
    eos = CovolumeEOS(1.4)
    u = random_covolume_field(d, eos, np.random.default_rng(3))
    solver = HyperbolicSolver(d, eos)
    visc = compute_graph_viscosities(u, solver)
    g = d.graph
    lam_ij = max_wavespeed_covolume(u[g.edge_i], u[g.edge_j], g.edge_normals, eos)
    lam_ji = max_wavespeed_covolume(u[g.edge_j], u[g.edge_i], -g.edge_normals, eos)
    d_ij = np.linalg.norm(g.c_ij, axis=1) * lam_ij
    d_ji = np.linalg.norm(g.c_ji, axis=1) * lam_ji
    np.testing.assert_allclose(visc.edge, np.maximum(d_ij, d_ji), rtol=1e-13)
    assert np.all(visc.edge >= 0)
    total = np.zeros(d.n_dg)
    np.add.at(total, g.edge_i, visc.edge)
    np.add.at(total, g.edge_j, visc.edge)
    np.add.at(total, g.boundary_nodes, visc.boundary)
    np.testing.assert_allclose(visc.diagonal, -total, rtol=1e-14)


# ------------------------------------------------------------ time step
def test_cfl_formula_and_homogeneity():
    assert cfl_timestep(np.array([-2.0]), np.array([1.0]), 0.5) == 0.125
    dii = -np.array([1.0, 3.0, 0.5])
    m = np.array([0.1, 0.2, 0.3])
    assert cfl_timestep(2 * dii, m, 0.3) == pytest.approx(0.5 * cfl_timestep(dii, m, 0.3))
    assert cfl_timestep(np.zeros(3), m, 0.3, tau_max=7.0) == 7.0
    with pytest.raises(ValueError):
        cfl_timestep(dii, m, 1.0)


def test_timestep_proportional_to_h():
    eos = CovolumeEOS(1.4)
    taus = []
    for n in (8, 16):
        d = Discretization(build_rectangle_mesh(((0, 1), (0, 1)), (n, n)))
        u = np.tile(eos.from_primitive(1.0, [[0.3, 0.1]], 1.0), (d.n_dg, 1))
        taus.append(HyperbolicSolver(d, eos).max_timestep(u, 0.5))
    assert taus[0] / taus[1] == pytest.approx(2.0, rel=0.01)


# ------------------------------------------------------------ updates
@pytest.mark.parametrize("eos", [CovolumeEOS(1.4, 0.1), IsothermalEOS(0.5)])
def test_rest_state_is_fixed_point(eos):
    d = Discretization(build_disk_mesh(2.0, 2))
    if eos.barotropic:
        u = np.column_stack([np.full(d.n_dg, 1.2), np.zeros((d.n_dg, 2))])
    else:
        u = np.tile(eos.from_primitive(1.2, [[0.0, 0.0]], 0.8), (d.n_dg, 1))
    s = HyperbolicSolver(d, eos, ReflectiveBoundary())
    tau = s.max_timestep(u, 0.5)
    assert np.abs(forward_euler_step(u, tau, s) - u).max() <= 1e-14
    assert np.abs(ssp_rk3_step(u, tau, s) - u).max() <= 1e-14


def test_uniform_flow_with_dirichlet_data_is_fixed_point():
    eos = CovolumeEOS(1.4)
    d = Discretization(build_rectangle_mesh(((0, 1), (0, 1)), (4, 4)))
    state = eos.from_primitive(1.0, [[0.7, -0.2]], 1.0)
    s = HyperbolicSolver(d, eos, DirichletBoundary(lambda x, t: np.tile(state, (len(x), 1))))
    u = np.tile(state, (d.n_dg, 1))
    tau = s.max_timestep(u, 0.5)
    assert np.abs(forward_euler_step(u, tau, s) - u).max() <= 1e-14


def test_mass_changes_only_by_boundary_flux():
    eos = CovolumeEOS(1.4)
    d = Discretization(build_disk_mesh(2.0, 2))
    u = random_covolume_field(d, eos, np.random.default_rng(4))
    s = HyperbolicSolver(d, eos, ReflectiveBoundary())
    tau = s.max_timestep(u, 0.5)
    new = s.forward_euler(u, tau)
    before = d.masses @ u
    after = d.masses @ new
    np.testing.assert_allclose(after - before, -tau * s.last_boundary_flux, atol=1e-13 * np.abs(before).max())
    assert abs(after[0] - before[0]) <= 1e-13 * before[0]  # reflective wall: no mass flux


def test_bar_state_matches_direct_formula():
    eos = CovolumeEOS(1.4)
    d = Discretization(build_rectangle_mesh(((0, 2), (0, 1)), (2, 1)))
    u = np.tile(prim(eos, 1.0, 0.0, 1.0), (d.n_dg, 1))
    u[4:] = prim(eos, 0.125, 0.0, 0.1)
    g = d.graph
    visc = HyperbolicSolver(d, eos).residual(u)[1]
    ubar, _ = bar_states(u, g, visc.edge, eos)
    k = np.flatnonzero((g.edge_i < 4) & (g.edge_j >= 4))[0]
    i, j = g.edge_i[k], g.edge_j[k]

    def flux(w):
        rho, mx, my, E = w
        vx, vy = mx / rho, my / rho
        p = 0.4 * (E - 0.5 * rho * (vx * vx + vy * vy))
        return np.array([[mx, my], [mx * vx + p, mx * vy], [my * vx, my * vy + p], [vx * (E + p), vy * (E + p)]])

    expected = 0.5 * (u[i] + u[j]) - (flux(u[j]) - flux(u[i])) @ g.c_ij[k] / (2.0 * visc.edge[k])
    np.testing.assert_allclose(ubar[k], expected, rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("mesh", ["two_cell", "disk"])
def test_graph_and_convex_forms_agree(mesh):
    eos = CovolumeEOS(1.4, 0.05)
    if mesh == "two_cell":
        d = Discretization(build_rectangle_mesh(((0, 2), (0, 1)), (2, 1)))
    else:
        d = Discretization(build_disk_mesh(1.0, 2))
    u = random_covolume_field(d, eos, np.random.default_rng(5))
    s = HyperbolicSolver(d, eos, ReflectiveBoundary())
    tau = s.max_timestep(u, 0.9)
    a = s.forward_euler(u, tau)
    b = s.convex_forward_euler(u, tau)
    assert np.abs(a - b).max() <= 1e-13 * np.abs(u).max()


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 3.0))
def test_ssprk3_preserves_admissibility(seed, amp):
    eos = CovolumeEOS(1.4)
    d = _small_disk()
    rng = np.random.default_rng(seed)
    u = random_covolume_field(d, eos, rng, amp)
    s = HyperbolicSolver(d, eos, ReflectiveBoundary())
    tau = 0.9 * s.admissible_limit(s.residual(u)[1])
    out = s.ssp_rk3(u, tau, check=False)
    assert np.all(eos.admissible(out))


_DISK = {}


def _small_disk():
    if "d" not in _DISK:
        _DISK["d"] = Discretization(build_disk_mesh(1.0, 1))
    return _DISK["d"]


def test_entropy_tally_examples():
    d = Discretization(build_disk_mesh(1.0, 1))
    u = np.column_stack([np.ones(d.n_dg), np.zeros((d.n_dg, 2))])
    assert entropy_tally(u, d.masses, IsothermalEOS(3.0)) == 0.0
    half = d.n_dg // 2
    eos = IsothermalEOS(1.0)
    w = random_isothermal_field(d, np.random.default_rng(0))
    whole = entropy_tally(w, d.masses, eos)
    parts = entropy_tally(w[:half], d.masses[:half], eos) + entropy_tally(w[half:], d.masses[half:], eos)
    assert whole == pytest.approx(parts, rel=1e-13)


@pytest.mark.parametrize("eos", [CovolumeEOS(1.4), IsothermalEOS(0.5)])
def test_entropy_does_not_increase_at_a_wall(eos):
    d = Discretization(build_disk_mesh(1.0, 2))
    rng = np.random.default_rng(6)
    for _ in range(10):
        if eos.barotropic:
            u = random_isothermal_field(d, rng)
        else:
            u = random_covolume_field(d, eos, rng)
        s = HyperbolicSolver(d, eos, ReflectiveBoundary())
        new = s.forward_euler(u, s.max_timestep(u, 0.5))
        assert s.entropy_tally(new) <= s.entropy_tally(u) + 1e-13 * abs(s.entropy_tally(u))


def test_ssprk3_time_order_on_vortex():
    from magep.scenarios import VortexParams, vortex_exact

    params = VortexParams()
    d = Discretization(build_rectangle_mesh(params.bounds, (12, 12)))
    eos = CovolumeEOS(1.4)
    s = HyperbolicSolver(d, eos, DirichletBoundary(lambda x, t: vortex_exact(x, t, params)))
    u0 = vortex_exact(d.dg_points, 0.0, params)
    T = 0.2

    def run(n):
        u, tau = u0.copy(), T / n
        for k in range(n):
            u = s.ssp_rk3(u, tau, k * tau)
        return u

    n0 = int(np.ceil(T / s.max_timestep(u0, 0.5)))
    ref = run(16 * n0)
    e = [np.abs(run(m * n0) - ref).max() for m in (1, 2, 4)]
    rates = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert np.all(rates >= 2.0), rates

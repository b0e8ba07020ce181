import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magep.discretization import Discretization
from magep.eos import CovolumeEOS
from magep.mesh import build_disk_mesh, build_rectangle_mesh
from magep.source_update import (
    SourceUpdate,
    ThetaParams,
    assemble_source_rhs,
    b_apply,
    b_inverse_apply,
    extrapolate,
    field_energy,
    kinetic_energy,
    schur_operator_apply,
    source_update_conserved,
    update_velocity,
)


@pytest.fixture(scope="module")
def disk():
    return Discretization(build_disk_mesh(2.0, 2))


def random_state(disc, seed):
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.5, 2.0, disc.n_dg)
    v = rng.normal(size=(disc.n_dg, 2))
    phi = np.zeros(disc.n_cg)
    phi[disc.free] = rng.normal(size=len(disc.free))
    return rho, v, phi


# ------------------------------------------------------------ rotation operator
def test_b_operator_example():
    p = ThetaParams(1.0, 1.0, 1.0, 1.0)
    np.testing.assert_allclose(b_apply([[1.0, 0.0]], p), [[1.0, 1.0]])
    np.testing.assert_allclose(b_inverse_apply([[1.0, 1.0]], p), [[1.0, 0.0]], atol=1e-16)


@settings(max_examples=100)
@given(st.floats(-1e6, 1e6))
def test_b_inverse_is_a_contraction(c):
    p = ThetaParams(1.0, 1.0, 1.0, c)
    M = np.column_stack([b_inverse_apply([1.0, 0.0], p), b_inverse_apply([0.0, 1.0], p)])
    assert np.linalg.svd(M, compute_uv=False).max() <= 1.0 + 1e-15


def test_theta_params_validation():
    for bad in (dict(theta=0.0), dict(tau=-1.0), dict(alpha=0.0)):
        kw = dict(theta=0.5, tau=0.1, alpha=1.0) | bad
        with pytest.raises(ValueError):
            ThetaParams(**kw)


def test_extrapolate():
    assert extrapolate(np.array(2.0), np.array(1.0), 0.5) == 3.0
    np.testing.assert_array_equal(extrapolate(np.arange(3.0), np.ones(3), 1.0), np.arange(3.0))


# ------------------------------------------------------------ potential operator
def test_zero_step_gives_stiffness(disk):
    rho, _, phi = random_state(disk, 0)
    s = SourceUpdate(disk, alpha=7.0, omega=3.0)
    np.testing.assert_array_equal(
        schur_operator_apply(s, phi, rho, s.params(0.0)), disk.stiffness_apply(phi)[disk.free]
    )


@pytest.mark.parametrize("omega", [0.0, 5.0, 1e6])
def test_operator_is_coercive(disk, omega):
    rho, _, phi = random_state(disk, 1)
    s = SourceUpdate(disk, alpha=10.0, omega=omega)
    p = s.params(0.05)
    a = phi @ s.schur_operator_apply(phi, rho, p)
    assert a >= phi @ disk.stiffness_apply(phi) * (1 - 1e-12)


def test_strong_field_limit_recovers_stiffness(disk):
    rho, _, phi = random_state(disk, 2)
    s = SourceUpdate(disk, alpha=1.0, omega=1e12)
    a = s.schur_operator_apply(phi, rho, s.params(0.1))
    k = disk.stiffness_apply(phi)
    assert np.abs(a - k)[disk.free].max() <= 1e-9 * np.abs(k).max()


def test_assembled_operator_matches_matrix_free(disk):
    rho, _, phi = random_state(disk, 3)
    s = SourceUpdate(disk, alpha=4.0, omega=2.0, theta=0.5)
    p = s.params(0.3)
    A = s.assembled_operator(rho, p)
    a = s.schur_operator_apply(phi, rho, p)[disk.free]
    np.testing.assert_allclose(A @ phi[disk.free], a, rtol=1e-12, atol=1e-12 * np.abs(a).max())


# ------------------------------------------------------------ right-hand side
def test_rhs_examples(disk):
    rho, v, phi = random_state(disk, 4)
    s = SourceUpdate(disk, alpha=2.0, omega=1.0)
    p = s.params(0.1)
    zero = assemble_source_rhs(s, np.zeros(disk.n_cg), np.zeros_like(v), rho, p)
    assert not zero.any()
    np.testing.assert_array_equal(
        assemble_source_rhs(s, phi, np.zeros_like(v), rho, p), disk.stiffness_apply(phi)[disk.free]
    )
    a = assemble_source_rhs(s, phi, v, rho, p)
    b = assemble_source_rhs(s, 2 * phi, 2 * v, rho, p)
    np.testing.assert_allclose(b, 2 * a, rtol=1e-13, atol=1e-14)


# ------------------------------------------------------------ solves
@pytest.mark.parametrize("prec", ["lu", "amg", "sgs", "jacobi"])
def test_manufactured_potential_solve(disk, prec):
    rho, _, phi = random_state(disk, 5)
    s = SourceUpdate(disk, alpha=3.0, omega=2.0, tol=1e-12, preconditioner=prec, maxiter=5000)
    p = s.params(0.2)
    rhs = s.schur_operator_apply(phi, rho, p)
    sol, info = s.solve_potential(rhs, rho, p)
    assert info.relative_residual <= 1e-12
    err = np.abs(sol - phi).max() / np.abs(phi).max()
    assert err <= 1e-9


def test_dirichlet_lift_is_respected():
    d = Discretization(build_rectangle_mesh(((0, 1), (0, 1)), (6, 6)))
    x = d.mesh.vertices
    g = (1.0 + x[:, 0] + 2 * x[:, 1])[d.constrained]
    s = SourceUpdate(d, alpha=1.0, dirichlet_values=g)
    rho = np.ones(d.n_dg)
    phi, _ = s.solve_potential(np.zeros(d.n_cg), rho, s.params(0.0))
    # harmonic linear data: the Q1 solution reproduces it exactly
    np.testing.assert_allclose(phi, 1.0 + x[:, 0] + 2 * x[:, 1], atol=1e-11)


def test_poisson_second_order():
    errs = []
    for n in (8, 16, 32):
        d = Discretization(build_rectangle_mesh(((0, 1), (0, 1)), (n, n)))
        s = SourceUpdate(d, alpha=1.0)
        exact = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])  # noqa: E731
        rhs = d.lumped_cg_load(2 * np.pi**2 * exact(d.dg_points))
        phi, _ = s.solve_potential(rhs, np.ones(d.n_dg), s.params(0.0))
        errs.append(np.abs(phi - exact(d.mesh.vertices)).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    print("Poisson nodal error rates", rates)
    assert np.all(rates >= 1.9)


# ------------------------------------------------------------ velocity update
def test_velocity_update_examples(disk):
    s = SourceUpdate(disk, alpha=1.0, omega=0.0)
    v = np.tile([1.0, -2.0], (disk.n_dg, 1))
    np.testing.assert_array_equal(update_velocity(s, v, np.zeros(disk.n_cg), s.params(0.3)), v)
    x = disk.mesh.vertices
    phi = 2.0 * x[:, 0]
    out = update_velocity(s, np.zeros_like(v), phi, s.params(0.25))
    np.testing.assert_allclose(out, np.tile([-0.5, 0.0], (disk.n_dg, 1)), atol=1e-13)


def test_drift_velocity_is_a_fixed_point_of_the_velocity_update():
    d = Discretization(build_rectangle_mesh(((0, 1), (0, 1)), (3, 3)))
    omega = 4.0
    s = SourceUpdate(d, alpha=1.0, omega=omega)
    x = d.mesh.vertices
    phi = 0.3 * x[:, 0] - 0.7 * x[:, 1]
    grad = np.array([0.3, -0.7])
    # E x B drift: -grad phi + Omega (v2, -v1) = 0
    v = np.tile([-grad[1] / omega, grad[0] / omega], (d.n_dg, 1))
    out = s.update_velocity(v, phi, s.params(0.7))
    np.testing.assert_allclose(out, v, atol=1e-13)


# ------------------------------------------------------------ conserved update
def test_density_and_internal_energy_untouched(disk):
    eos = CovolumeEOS(1.4)
    rho, v, phi = random_state(disk, 6)
    u = eos.from_primitive(rho, v, np.random.default_rng(6).uniform(0.5, 2.0, disk.n_dg))
    s = SourceUpdate(disk, alpha=5.0, omega=2.0, theta=0.5)
    new, _ = source_update_conserved(s, u, phi, 0.1)
    np.testing.assert_array_equal(new[:, 0], u[:, 0])
    eps = lambda w: w[:, 3] - 0.5 * np.sum(w[:, 1:3] ** 2, axis=1) / w[:, 0]  # noqa: E731
    np.testing.assert_allclose(eps(new), eps(u), rtol=1e-12)


@pytest.mark.parametrize("theta", [0.5, 0.75, 1.0])
@pytest.mark.parametrize("omega", [0.0, 3.0])
def test_discrete_energy_identity(disk, theta, omega):
    rho, v, phi = random_state(disk, 7)
    alpha = 2.0
    s = SourceUpdate(disk, alpha=alpha, omega=omega, theta=theta, tol=1e-14)
    v1, phi1, _, _ = s.step(rho, v, phi, 0.2)
    e0 = kinetic_energy(disk, rho, v) + field_energy(disk, phi, alpha)
    e1 = kinetic_energy(disk, rho, v1) + field_energy(disk, phi1, alpha)
    penalty = 2 * (theta - 0.5) * (
        kinetic_energy(disk, rho, v1 - v) + field_energy(disk, phi1 - phi, alpha)
    )
    assert abs(e1 - e0 + penalty) <= 1e-10 * e0
    assert e1 <= e0 * (1 + 1e-12)

import numpy as np
import pytest

from magep import kernels
from magep._kernels_py import flux_dot
from magep.discretization import Discretization
from magep.eos import CovolumeEOS, IsothermalEOS
from magep.hyperbolic import HyperbolicSolver, ReflectiveBoundary
from magep.mesh import build_disk_mesh

try:
    kernels.get_backend("cython")
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "numpy")
    assert kernels.get_backend("numpy").BACKEND == "numpy"
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("eos", [CovolumeEOS(1.4), CovolumeEOS(1.4, 0.2), IsothermalEOS(0.7)])
def test_flux_dot_matches_full_flux(eos):
    rng = np.random.default_rng(0)
    n = 50
    rho = rng.uniform(0.2, 2.0, n)
    v = rng.uniform(-2, 2, (n, 2))
    if eos.barotropic:
        u = np.column_stack([rho, rho[:, None] * v])
    else:
        u = eos.from_primitive(rho, v, rng.uniform(0.1, 2.0, n))
    p = eos.pressure(u)
    c = rng.normal(size=(n, 2))
    expected = np.einsum("nkd,nd->nk", eos.flux(u, p), c)
    np.testing.assert_allclose(flux_dot(u, u[:, 1:3] / u[:, :1], p, c), expected, rtol=1e-13, atol=1e-14)


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled kernels not built")
@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("eos", [CovolumeEOS(1.4, 0.1), IsothermalEOS(0.5)])
def test_compiled_and_numpy_residuals_agree(seed, eos):
    d = Discretization(build_disk_mesh(2.0, 2))
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.2, 2.0, d.n_dg)
    v = rng.uniform(-1, 1, (d.n_dg, 2))
    if eos.barotropic:
        u = np.column_stack([rho, rho[:, None] * v])
    else:
        u = eos.from_primitive(rho, v, rng.uniform(0.2, 2.0, d.n_dg))
    out = []
    for name in ("cython", "numpy"):
        s = HyperbolicSolver(d, eos, ReflectiveBoundary(), kernels=kernels.get_backend(name))
        r, visc = s.residual(u)
        out.append((r, visc.edge, visc.diagonal))
    for a, b in zip(*out):
        assert np.abs(a - b).max() <= 1e-12 * max(np.abs(b).max(), 1.0)

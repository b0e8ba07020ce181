"""Energy tallies, Gauss-law residual, error norms and Fourier-mode growth rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .discretization import Discretization
from .mesh import CellMapping, shape_values


@dataclass(frozen=True)
class EnergyLedger:
    hyperbolic: float
    kinetic: float
    field: float

    @property
    def total(self) -> float:
        return self.hyperbolic + self.field


def total_energy(disc: Discretization, u, phi, alpha: float, eos) -> EnergyLedger:
    """sum_i m_i E_i (or the barotropic entropy) plus (2 alpha)^-1 ||grad phi||^2."""
    rho = u[:, 0]
    kin = 0.5 * float(disc.masses @ (np.sum(u[:, 1:3] ** 2, axis=1) / rho))
    if eos.barotropic:
        hyp = float(disc.masses @ eos.entropy(u))
    else:
        hyp = float(disc.masses @ u[:, 3])
    fld = float(phi @ disc.stiffness_apply(phi)) / (2.0 * alpha)
    return EnergyLedger(hyp, kin, fld)


def gauss_residual(disc: Discretization, rho, phi, alpha: float, rho_background=None):
    """R[w_i] = alpha <rho - rho_bg, w_i>_h - (grad phi, grad w_i) for every CG node."""
    q = rho if rho_background is None else rho - rho_background
    return alpha * disc.lumped_cg_load(q) - disc.stiffness_apply(phi)


def gauss_residual_norm(disc: Discretization, rho, phi, alpha: float, rho_background=None):
    """max over free CG nodes of |R[w_i]| / ||grad w_i||."""
    r = gauss_residual(disc, rho, phi, alpha, rho_background)[disc.free]
    kdiag = disc.stiffness_matrix().diagonal()[disc.free]
    if len(r) == 0:
        return 0.0
    return float(np.max(np.abs(r) / np.sqrt(kdiag)))


_G3 = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_W3 = np.array([5.0, 8.0, 5.0]) / 18.0
GAUSS3_POINTS = np.array([[a, b] for b in _G3 for a in _G3])
GAUSS3_WEIGHTS = np.array([wa * wb for wb in _W3 for wa in _W3])


def l1_error(disc: Discretization, u, exact, t: float) -> float:
    """sum over components of ||u_exact(t) - u_h||_L1 with 3x3 Gauss quadrature per cell."""
    pts = disc.map_points(GAUSS3_POINTS)  # (nc, 9, 2)
    uh = disc.evaluate_dg(u, GAUSS3_POINTS)  # (nc, 9, ncomp)
    ue = exact(pts.reshape(-1, 2), t).reshape(uh.shape)
    det = disc.mesh.jacobian_determinants(GAUSS3_POINTS)
    w = det * GAUSS3_WEIGHTS
    return float(np.sum(w[..., None] * np.abs(ue - uh)))


def l1_error_vortex(disc: Discretization, u, t: float, params=None) -> float:
    from .scenarios import VortexParams, vortex_exact

    params = params or VortexParams()
    return l1_error(disc, u, lambda x, s: vortex_exact(x, s, params), t)


class PointLocator:
    """Locate points in a quadrilateral mesh and return their reference coordinates."""

    def __init__(self, disc: Discretization, candidates: int = 8):
        self.disc = disc
        xv = disc.mesh.vertices[disc.cells]
        self.tree = cKDTree(xv.mean(axis=1))
        self.k = min(candidates, disc.n_cells)

    def locate(self, points, tol: float = 1e-12):
        points = np.atleast_2d(points)
        _, cand = self.tree.query(points, k=self.k)
        cand = np.atleast_2d(cand)
        cells = np.empty(len(points), dtype=np.int64)
        refs = np.empty((len(points), 2))
        for p, x in enumerate(points):
            for c in cand[p]:
                xi = CellMapping(self.disc.mesh.vertices[self.disc.cells[c]]).inverse(x, tol)
                if np.all(xi >= -1e-10) and np.all(xi <= 1.0 + 1e-10):
                    cells[p], refs[p] = c, xi
                    break
            else:
                raise ValueError(f"point {x} not found in the mesh")
        return cells, refs


class CircleSampler:
    """Evaluate a CG field at equispaced angles on a circle."""

    def __init__(self, disc: Discretization, radius: float, n_samples: int = 256, start=0.0):
        self.disc = disc
        self.n = n_samples
        ang = start + 2.0 * np.pi * np.arange(n_samples) / n_samples
        self.points = radius * np.column_stack([np.cos(ang), np.sin(ang)])
        cells, refs = PointLocator(disc).locate(self.points)
        self.vertex_ids = disc.cells[cells]  # (n, 4)
        self.weights = shape_values(refs)  # (n, 4)

    def sample(self, phi) -> np.ndarray:
        return np.sum(self.weights * phi[self.vertex_ids], axis=1)

    def mode_amplitude(self, phi, mode: int) -> float:
        """|c_l| scaled so that cos(l angle) has amplitude 1."""
        c = np.fft.rfft(self.sample(phi))
        return float(np.abs(c[mode]) * 2.0 / self.n)


def mode_amplitude(disc: Discretization, phi, mode: int, radius: float, n_samples: int = 256):
    return CircleSampler(disc, radius, n_samples).mode_amplitude(phi, mode)


def fit_growth_rate(times, amplitudes, window) -> float:
    """Least-squares slope of ln(amplitude) against time inside ``window``."""
    t = np.asarray(times, dtype=float)
    a = np.asarray(amplitudes, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 2:
        raise ValueError(f"no samples inside the fit window {window}")
    if sel.sum() < 10:
        raise ValueError(f"only {sel.sum()} samples inside {window}; need at least 10")
    slope, _ = np.polyfit(t[sel], np.log(a[sel]), 1)
    return float(slope)


def convergence_rates(errors) -> list:
    """log2(e_h / e_{h/2}) for successive entries."""
    e = np.asarray(errors, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))


def dg_gradient_magnitude(disc: Discretization, f) -> np.ndarray:
    g = disc.dg_gradient(f)
    return np.hypot(g[:, 0], g[:, 1])


__all__ = [
    "EnergyLedger",
    "total_energy",
    "gauss_residual",
    "gauss_residual_norm",
    "l1_error",
    "l1_error_vortex",
    "PointLocator",
    "CircleSampler",
    "mode_amplitude",
    "fit_growth_rate",
    "convergence_rates",
    "dg_gradient_magnitude",
]

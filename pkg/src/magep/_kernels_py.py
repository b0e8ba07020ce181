"""Pure numpy implementation of the edge kernels.

Used when the compiled extension is unavailable or when the environment
variable ``MAGEP_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def lambda_covolume(vL, pL, cL, aL, pfL, vR, pR, cR, aR, pfR, gamma):
    """Two-rarefaction wavespeed bound.

    ``a = 1 - b rho`` and ``pf = p**(-(gamma-1)/(2 gamma))`` are passed in
    precomputed. A negative numerator signals vacuum formation; it is
    clamped to zero so that p# = 0.
    """
    num = cL * aL + cR * aR - 0.5 * (gamma - 1.0) * (vR - vL)
    num = np.maximum(num, 0.0)
    den = cL * aL * pfL + cR * aR * pfR
    psharp = (num / den) ** (2.0 * gamma / (gamma - 1.0))
    k = 0.5 * (gamma + 1.0) / gamma
    lam1 = vL - cL * np.sqrt(1.0 + k * np.maximum((psharp - pL) / pL, 0.0))
    lam3 = vR + cR * np.sqrt(1.0 + k * np.maximum((psharp - pR) / pR, 0.0))
    return np.maximum(np.maximum(-lam1, 0.0), np.maximum(lam3, 0.0))


def lambda_barotropic(vL, cL, vR, cR):
    return np.maximum(np.abs(vL), np.abs(vR)) + np.maximum(cL, cR)


def flux_dot(u, vel, p, c):
    """f(u) c for Euler-type fluxes: u (v.c) + p (0, c_1, c_2[, v.c])."""
    vc = vel[:, 0] * c[:, 0] + vel[:, 1] * c[:, 1]
    out = u * vc[:, None]
    out[:, 1] += p * c[:, 0]
    out[:, 2] += p * c[:, 1]
    if u.shape[1] == 4:
        out[:, 3] += p * vc
    return out


def edge_residual(u, vel, p, c, a, pf, ei, ej, cij, cji, normals, weights,
                  gamma, barotropic, r, dii, d):
    """Accumulate the interior graph terms into ``r`` and ``dii``.

    For every undirected pair (i, j)::

        d      = max(|c_ij|, |c_ji|) * lambda(u_i, u_j, n_ij)
        r_i   += f(u_j) c_ij - d (u_j - u_i)
        r_j   += f(u_i) c_ji - d (u_i - u_j)
        dii_i -= d ;  dii_j -= d

    ``normals`` and ``weights`` are n_ij and max(|c_ij|, |c_ji|); ``d`` is
    written to the output array of length n_edges.
    """
    nx, ny = normals[:, 0], normals[:, 1]
    vL = vel[ei, 0] * nx + vel[ei, 1] * ny
    vR = vel[ej, 0] * nx + vel[ej, 1] * ny
    if barotropic:
        lam = lambda_barotropic(vL, c[ei], vR, c[ej])
    else:
        lam = lambda_covolume(
            vL, p[ei], c[ei], a[ei], pf[ei], vR, p[ej], c[ej], a[ej], pf[ej], gamma
        )
    d[:] = weights * lam

    n = len(u)
    du = u[ej] - u[ei]
    fj_c = flux_dot(u[ej], vel[ej], p[ej], cij)
    fi_c = flux_dot(u[ei], vel[ei], p[ei], cji)
    for k in range(u.shape[1]):
        r[:, k] += np.bincount(ei, fj_c[:, k] - d * du[:, k], minlength=n)
        r[:, k] += np.bincount(ej, fi_c[:, k] + d * du[:, k], minlength=n)
    dii -= np.bincount(ei, d, minlength=n) + np.bincount(ej, d, minlength=n)

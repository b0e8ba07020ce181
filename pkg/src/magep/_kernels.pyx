# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled edge kernels; mirror of ``_kernels_py``."""

import numpy as np
from libc.math cimport sqrt, pow, fabs, fmax

BACKEND = "cython"


cdef inline double _lam_cov(double vL, double pL, double cL, double aL, double pfL,
                            double vR, double pR, double cR, double aR, double pfR,
                            double gamma) nogil:
    cdef double num = cL * aL + cR * aR - 0.5 * (gamma - 1.0) * (vR - vL)
    cdef double den, x, ps, k, lam1, lam3
    if num < 0.0:
        num = 0.0
    den = cL * aL * pfL + cR * aR * pfR
    x = num / den
    # p# > p_K  <=>  x * pf_K > 1; skip the power when both sides are expansive
    if x * pfL <= 1.0 and x * pfR <= 1.0:
        lam1 = vL - cL
        lam3 = vR + cR
    else:
        ps = pow(x, 2.0 * gamma / (gamma - 1.0))
        k = 0.5 * (gamma + 1.0) / gamma
        lam1 = vL - cL * sqrt(1.0 + k * fmax((ps - pL) / pL, 0.0))
        lam3 = vR + cR * sqrt(1.0 + k * fmax((ps - pR) / pR, 0.0))
    return fmax(fmax(-lam1, 0.0), fmax(lam3, 0.0))


def lambda_covolume(vL, pL, cL, aL, pfL, vR, pR, cR, aR, pfR, double gamma):
    cdef double[::1] a_vL = np.ascontiguousarray(np.atleast_1d(vL), dtype=np.float64)
    cdef double[::1] a_pL = np.ascontiguousarray(np.broadcast_to(pL, a_vL.shape[0]), dtype=np.float64)
    cdef double[::1] a_cL = np.ascontiguousarray(np.broadcast_to(cL, a_vL.shape[0]), dtype=np.float64)
    cdef double[::1] a_aL = np.ascontiguousarray(np.broadcast_to(aL, a_vL.shape[0]), dtype=np.float64)
    cdef double[::1] a_fL = np.ascontiguousarray(np.broadcast_to(pfL, a_vL.shape[0]), dtype=np.float64)
    cdef double[::1] a_vR = np.ascontiguousarray(np.broadcast_to(vR, a_vL.shape[0]), dtype=np.float64)
    cdef double[::1] a_pR = np.ascontiguousarray(np.broadcast_to(pR, a_vL.shape[0]), dtype=np.float64)
    cdef double[::1] a_cR = np.ascontiguousarray(np.broadcast_to(cR, a_vL.shape[0]), dtype=np.float64)
    cdef double[::1] a_aR = np.ascontiguousarray(np.broadcast_to(aR, a_vL.shape[0]), dtype=np.float64)
    cdef double[::1] a_fR = np.ascontiguousarray(np.broadcast_to(pfR, a_vL.shape[0]), dtype=np.float64)
    cdef Py_ssize_t n = a_vL.shape[0], e
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for e in range(n):
            o[e] = _lam_cov(a_vL[e], a_pL[e], a_cL[e], a_aL[e], a_fL[e],
                            a_vR[e], a_pR[e], a_cR[e], a_aR[e], a_fR[e], gamma)
    return out


def lambda_barotropic(vL, cL, vR, cR):
    return np.maximum(np.abs(vL), np.abs(vR)) + np.maximum(cL, cR)


def edge_residual(double[:, ::1] u, double[:, ::1] vel,
                  double[::1] p, double[::1] c, double[::1] a, double[::1] pf,
                  long[::1] ei, long[::1] ej, double[:, ::1] cij, double[:, ::1] cji,
                  double[:, ::1] normals, double[::1] weights,
                  double gamma, bint barotropic,
                  double[:, ::1] r, double[::1] dii, double[::1] d):
    """Accumulate interior graph terms; see ``_kernels_py.edge_residual``."""
    cdef Py_ssize_t ne = ei.shape[0], nk = u.shape[1]
    cdef Py_ssize_t e, i, j, k
    cdef double nx, ny, vL, vR, lam, de, du, vci, vcj, fi, fj
    with nogil:
        for e in range(ne):
            i = ei[e]
            j = ej[e]
            nx = normals[e, 0]
            ny = normals[e, 1]
            vL = vel[i, 0] * nx + vel[i, 1] * ny
            vR = vel[j, 0] * nx + vel[j, 1] * ny
            if barotropic:
                lam = fmax(fabs(vL), fabs(vR)) + fmax(c[i], c[j])
            else:
                lam = _lam_cov(vL, p[i], c[i], a[i], pf[i],
                               vR, p[j], c[j], a[j], pf[j], gamma)
            de = weights[e] * lam
            d[e] = de
            dii[i] -= de
            dii[j] -= de
            # f(u_j).c_ij and f(u_i).c_ji without forming the flux tensor
            vcj = vel[j, 0] * cij[e, 0] + vel[j, 1] * cij[e, 1]
            vci = vel[i, 0] * cji[e, 0] + vel[i, 1] * cji[e, 1]
            for k in range(nk):
                fj = u[j, k] * vcj
                fi = u[i, k] * vci
                if k == 1:
                    fj = fj + p[j] * cij[e, 0]
                    fi = fi + p[i] * cji[e, 0]
                elif k == 2:
                    fj = fj + p[j] * cij[e, 1]
                    fi = fi + p[i] * cji[e, 1]
                elif k == 3:
                    fj = fj + p[j] * vcj
                    fi = fi + p[i] * vci
                du = u[j, k] - u[i, k]
                r[i, k] += fj - de * du
                r[j, k] += fi + de * du

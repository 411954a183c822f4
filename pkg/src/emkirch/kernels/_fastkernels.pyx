# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled evaluation kernels (see package docstring for the contracts).

Inner loops are plain C with explicit real/imaginary arithmetic; the loop
over evaluation points is OpenMP-parallel while each point's reduction over
sources stays sequential, so results are independent of the thread count.
Each point is handled by a helper function so its scratch arrays live on
the worker thread's stack.
"""

import numpy as np

cimport numpy as cnp
cimport openmp
from cython.parallel cimport prange
from libc.math cimport M_PI, cos, sin, sqrt

from ..errors import SingularEvaluationError

cnp.import_array()

GUARD_MSG = "evaluation point closer than the singularity guard to a source"


def set_num_threads(int n):
    """Cap the OpenMP thread count for the point loops.

    Parallelism is across evaluation points only (per-point reductions are
    sequential), so this never changes results.
    """
    if n > 0:
        openmp.omp_set_num_threads(n)


cdef inline void _dyadic_parts(double dist, double k, double* ar, double* ai,
                               double* br, double* bi) noexcept nogil:
    # G = A I - B d d^T with A = g (1+m), B = g (1+3m) / r^2,
    # g = exp(ikr)/(4 pi r), m = (ikr - 1)/(kr)^2.
    cdef double t = k * dist
    cdef double q = 1.0 / (4.0 * M_PI * dist)
    cdef double c = cos(t)
    cdef double s = sin(t)
    cdef double it2 = 1.0 / (t * t)
    cdef double it = 1.0 / t
    cdef double r2 = dist * dist
    ar[0] = q * (c * (1.0 - it2) - s * it)
    ai[0] = q * (s * (1.0 - it2) + c * it)
    br[0] = q * (c * (1.0 - 3.0 * it2) - s * 3.0 * it) / r2
    bi[0] = q * (s * (1.0 - 3.0 * it2) + c * 3.0 * it) / r2


cdef int _field_point(const double[:, ::1] src, const double[:, :, ::1] amp,
                      double tx, double ty, double tz, double k, double min_r,
                      double[:, ::1] out_row) noexcept nogil:
    cdef Py_ssize_t s, j, n_s = src.shape[0]
    cdef double dx, dy, dz, dist, ar, ai, br, bi, dotr, doti, fr, fi
    cdef double d[3]
    cdef double accr[3]
    cdef double acci[3]
    accr[0] = accr[1] = accr[2] = 0.0
    acci[0] = acci[1] = acci[2] = 0.0
    for s in range(n_s):
        dx = tx - src[s, 0]
        dy = ty - src[s, 1]
        dz = tz - src[s, 2]
        dist = sqrt(dx * dx + dy * dy + dz * dz)
        if dist <= min_r:
            return 1
        _dyadic_parts(dist, k, &ar, &ai, &br, &bi)
        d[0] = dx
        d[1] = dy
        d[2] = dz
        # (d . a); the 1/r^2 of the radial term is already inside B
        dotr = dx * amp[s, 0, 0] + dy * amp[s, 1, 0] + dz * amp[s, 2, 0]
        doti = dx * amp[s, 0, 1] + dy * amp[s, 1, 1] + dz * amp[s, 2, 1]
        fr = br * dotr - bi * doti
        fi = br * doti + bi * dotr
        for j in range(3):
            accr[j] += ar * amp[s, j, 0] - ai * amp[s, j, 1] - fr * d[j]
            acci[j] += ar * amp[s, j, 1] + ai * amp[s, j, 0] - fi * d[j]
    for j in range(3):
        out_row[j, 0] = accr[j]
        out_row[j, 1] = acci[j]
    return 0


def green_field(sources, amplitudes, targets, double k, double min_r):
    """Sum_s G(t, x_s; k) a_s for every target t.  Returns (T, 3) complex."""
    cdef const double[:, ::1] src = np.ascontiguousarray(sources, dtype=np.float64)
    cdef const double[:, ::1] tgt = np.ascontiguousarray(targets, dtype=np.float64)
    amp_arr = np.ascontiguousarray(amplitudes, dtype=np.complex128)
    cdef const double[:, :, ::1] amp = amp_arr.view(np.float64).reshape(-1, 3, 2)
    out_arr = np.empty((tgt.shape[0], 3), dtype=np.complex128)
    cdef double[:, :, ::1] out = out_arr.view(np.float64).reshape(-1, 3, 2)
    cdef Py_ssize_t it, n_t = tgt.shape[0]
    cdef Py_ssize_t nbad = 0
    for it in prange(n_t, nogil=True, schedule="static"):
        nbad += _field_point(src, amp, tgt[it, 0], tgt[it, 1], tgt[it, 2],
                             k, min_r, out[it])
    if nbad > 0:
        raise SingularEvaluationError(GUARD_MSG)
    return out_arr


cdef int _stack_point(const double[:, ::1] el, const double[::1] w,
                      double px, double py, double pz, double k, double min_r,
                      double sgn, double[:, :, ::1] out_row) noexcept nogil:
    cdef Py_ssize_t m, i, j, n_m = el.shape[0]
    cdef double dx, dy, dz, dist, ar, ai, br, bi, wm, er, ei
    cdef double d[3]
    for m in range(n_m):
        dx = px - el[m, 0]
        dy = py - el[m, 1]
        dz = pz - el[m, 2]
        dist = sqrt(dx * dx + dy * dy + dz * dz)
        if dist <= min_r:
            return 1
        _dyadic_parts(dist, k, &ar, &ai, &br, &bi)
        d[0] = dx
        d[1] = dy
        d[2] = dz
        wm = w[m]
        for i in range(3):
            for j in range(3):
                er = -br * d[i] * d[j]
                ei = -bi * d[i] * d[j]
                if i == j:
                    er = er + ar
                    ei = ei + ai
                out_row[i, 3 * m + j, 0] = wm * er
                out_row[i, 3 * m + j, 1] = sgn * wm * ei
    return 0


def green_stack(points, elements, double k, double min_r, bint conjugate,
                weights=None):
    """Blocks [w_m G(p, x_m; k)] side by side.  Returns (P, 3, 3M) complex."""
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] el = np.ascontiguousarray(elements, dtype=np.float64)
    cdef Py_ssize_t n_p = pts.shape[0], n_m = el.shape[0]
    w_arr = np.ascontiguousarray(
        weights if weights is not None else np.ones(n_m), dtype=np.float64
    )
    cdef const double[::1] w = w_arr
    out_arr = np.empty((n_p, 3, 3 * n_m), dtype=np.complex128)
    cdef double[:, :, :, ::1] out = out_arr.view(np.float64).reshape(
        n_p, 3, 3 * n_m, 2
    )
    cdef double sgn = -1.0 if conjugate else 1.0
    cdef Py_ssize_t p
    cdef Py_ssize_t nbad = 0
    for p in prange(n_p, nogil=True, schedule="static"):
        nbad += _stack_point(el, w, pts[p, 0], pts[p, 1], pts[p, 2],
                             k, min_r, sgn, out[p])
    if nbad > 0:
        raise SingularEvaluationError(GUARD_MSG)
    return out_arr


cdef int _moments_point(const double[:, ::1] el, const double[::1] w,
                        double px, double py, double pz, double min_r,
                        double[:, :, ::1] out_row) noexcept nogil:
    cdef Py_ssize_t m, i, q, n_m = el.shape[0]
    cdef double dx, dy, dz, r2, dist, g2, a, coef, base
    cdef double u[3]
    cdef double ssum[3]
    cdef double rr[3][6]
    for q in range(3):
        ssum[q] = 0.0
        for i in range(6):
            rr[q][i] = 0.0
    for m in range(n_m):
        dx = px - el[m, 0]
        dy = py - el[m, 1]
        dz = pz - el[m, 2]
        r2 = dx * dx + dy * dy + dz * dz
        dist = sqrt(r2)
        if dist <= min_r:
            return 1
        g2 = w[m] / (16.0 * M_PI * M_PI * r2)
        u[0] = dx / dist
        u[1] = dy / dist
        u[2] = dz / dist
        a = g2
        for q in range(3):
            ssum[q] += a
            rr[q][0] += a * u[0] * u[0]
            rr[q][1] += a * u[1] * u[1]
            rr[q][2] += a * u[2] * u[2]
            rr[q][3] += a * u[0] * u[1]
            rr[q][4] += a * u[0] * u[2]
            rr[q][5] += a * u[1] * u[2]
            a = a / r2
    # T0 = S0 I - R0; T2' = -S1 I + 5 R1; T4 = S2 I + 3 R2
    for q in range(3):
        coef = -1.0 if q == 0 else (5.0 if q == 1 else 3.0)
        base = -ssum[1] if q == 1 else ssum[q]
        out_row[q, 0, 0] = base + coef * rr[q][0]
        out_row[q, 1, 1] = base + coef * rr[q][1]
        out_row[q, 2, 2] = base + coef * rr[q][2]
        out_row[q, 0, 1] = coef * rr[q][3]
        out_row[q, 1, 0] = coef * rr[q][3]
        out_row[q, 0, 2] = coef * rr[q][4]
        out_row[q, 2, 0] = coef * rr[q][4]
        out_row[q, 1, 2] = coef * rr[q][5]
        out_row[q, 2, 1] = coef * rr[q][5]
    return 0


def psf_moments(elements, weights, points, double min_r):
    """k-independent coefficients of H(y, y; k); see pykernels.psf_moments."""
    cdef const double[:, ::1] el = np.ascontiguousarray(elements, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n_p = pts.shape[0]
    out_arr = np.empty((n_p, 3, 3, 3))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t p
    cdef Py_ssize_t nbad = 0
    for p in prange(n_p, nogil=True, schedule="static"):
        nbad += _moments_point(el, w, pts[p, 0], pts[p, 1], pts[p, 2],
                               min_r, out[p])
    if nbad > 0:
        raise SingularEvaluationError(GUARD_MSG)
    return out_arr


def psf_diag(elements, weights, points, double k, double min_r):
    """H(y, y; k) at each point; real symmetric PSD, shape (P, 3, 3)."""
    mom = psf_moments(elements, weights, points, min_r)
    return mom[:, 0] + mom[:, 1] / k**2 + mom[:, 2] / k**4


cdef int _pair_point(const double[:, ::1] el, const double[:, :, :, ::1] gf,
                     double px, double py, double pz, double k, double min_r,
                     double[:, :, ::1] out_row) noexcept nogil:
    cdef Py_ssize_t m, i, j, l, n_m = el.shape[0]
    cdef double dx, dy, dz, dist, ar, ai, br, bi, gr, gi, sr, si
    cdef double d[3]
    cdef double pr[3][3]
    cdef double pim[3][3]
    for i in range(3):
        for j in range(3):
            pr[i][j] = 0.0
            pim[i][j] = 0.0
    for m in range(n_m):
        dx = px - el[m, 0]
        dy = py - el[m, 1]
        dz = pz - el[m, 2]
        dist = sqrt(dx * dx + dy * dy + dz * dz)
        if dist <= min_r:
            return 1
        _dyadic_parts(dist, k, &ar, &ai, &br, &bi)
        d[0] = dx
        d[1] = dy
        d[2] = dz
        # row i of conj(G(x_m, p)) times column j of the fixed block
        for i in range(3):
            for j in range(3):
                sr = 0.0
                si = 0.0
                for l in range(3):
                    gr = -br * d[i] * d[l]
                    gi = bi * d[i] * d[l]
                    if i == l:
                        gr = gr + ar
                        gi = gi - ai
                    sr = sr + gr * gf[m, l, j, 0] - gi * gf[m, l, j, 1]
                    si = si + gr * gf[m, l, j, 1] + gi * gf[m, l, j, 0]
                pr[i][j] += sr
                pim[i][j] += si
    for i in range(3):
        for j in range(3):
            out_row[i, j, 0] = pr[i][j]
            out_row[i, j, 1] = pim[i][j]
    return 0


def psf_pair(elements, weights, points, y2, double k, double min_r):
    """H(y_p, y2; k) = sum_m w_m conj(G(x_m, y_p)) G(x_m, y2), (P, 3, 3)."""
    cdef const double[:, ::1] el = np.ascontiguousarray(elements, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    y2v = np.ascontiguousarray(y2, dtype=np.float64)
    cdef const double[::1] y2m = y2v
    cdef Py_ssize_t n_p = pts.shape[0], n_m = el.shape[0]

    # fixed-side blocks w_m G(x_m, y2; k), precomputed once
    gf_arr = np.empty((n_m, 3, 3), dtype=np.complex128)
    cdef double[:, :, :, ::1] gf = gf_arr.view(np.float64).reshape(n_m, 3, 3, 2)
    cdef Py_ssize_t m, i, j
    cdef double dx, dy, dz, dist, ar, ai, br, bi, gr, gi
    cdef double d[3]
    for m in range(n_m):
        dx = el[m, 0] - y2m[0]
        dy = el[m, 1] - y2m[1]
        dz = el[m, 2] - y2m[2]
        dist = sqrt(dx * dx + dy * dy + dz * dz)
        if dist <= min_r:
            raise SingularEvaluationError(GUARD_MSG)
        _dyadic_parts(dist, k, &ar, &ai, &br, &bi)
        d[0] = dx
        d[1] = dy
        d[2] = dz
        for i in range(3):
            for j in range(3):
                gr = -br * d[i] * d[j]
                gi = -bi * d[i] * d[j]
                if i == j:
                    gr += ar
                    gi += ai
                gf[m, i, j, 0] = w[m] * gr
                gf[m, i, j, 1] = w[m] * gi

    out_arr = np.empty((n_p, 3, 3), dtype=np.complex128)
    cdef double[:, :, :, ::1] out = out_arr.view(np.float64).reshape(n_p, 3, 3, 2)
    cdef Py_ssize_t p
    cdef Py_ssize_t nbad = 0
    for p in prange(n_p, nogil=True, schedule="static"):
        nbad += _pair_point(el, gf, pts[p, 0], pts[p, 1], pts[p, 2],
                            k, min_r, out[p])
    if nbad > 0:
        raise SingularEvaluationError(GUARD_MSG)
    return out_arr

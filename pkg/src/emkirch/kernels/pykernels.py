"""Pure-numpy implementations of the hot evaluation kernels.

These are the fallback used when the compiled extension is unavailable;
the contracts (and the tolerances the rest of the package may assume) are
identical.  Work is chunked over evaluation points to bound temporary
memory; chunking never changes the per-point reduction, so results do not
depend on chunk size.

Dyadic kernel recap: G(x, y; k) = g [ (1+m) I - (1+3m) rr^T/r^2 ] with
g = exp(ikr)/(4 pi r), m = m(kr) = (ikr - 1)/(kr)^2, r = x - y.  The
coincident-point quadratures use the exact algebra

    conj(G) G = |g|^2 [ (1 - t^-2 + t^-4)(I - rr^T/r^2)
                        + (4 t^-2 + 4 t^-4) rr^T/r^2 ],    t = kr,

which is real symmetric and polynomial in 1/k^2; `psf_moments` exposes the
three k-independent coefficient matrices.
"""

from __future__ import annotations

import numpy as np

from ..errors import SingularEvaluationError

# Cap on (points x elements) pairs held in temporaries at once.
_PAIR_BUDGET = 1 << 18


def _chunk(n_points: int, n_src: int) -> int:
    return max(1, min(n_points, _PAIR_BUDGET // max(1, n_src)))


def _diffs(targets: np.ndarray, sources: np.ndarray, min_r: float):
    """Pairwise difference vectors and distances, singularity-guarded."""
    d = targets[:, None, :] - sources[None, :, :]
    dist = np.sqrt(np.einsum("tsk,tsk->ts", d, d))
    if dist.size and dist.min() < min_r:
        raise SingularEvaluationError(
            "evaluation point closer than the singularity guard to a source"
        )
    return d, dist


def green_field(sources, amplitudes, targets, k: float, min_r: float) -> np.ndarray:
    """Sum_s G(t, x_s; k) a_s for every target t.  Returns (T, 3) complex."""
    sources = np.asarray(sources, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=complex)
    targets = np.asarray(targets, dtype=float)
    out = np.empty((targets.shape[0], 3), dtype=complex)
    step = _chunk(targets.shape[0], sources.shape[0])
    for lo in range(0, targets.shape[0], step):
        t = targets[lo : lo + step]
        d, dist = _diffs(t, sources, min_r)
        g = np.exp(1j * k * dist) / (4.0 * np.pi * dist)
        m = (1j * k * dist - 1.0) / (k * dist) ** 2
        radial = np.einsum("tsk,sk->ts", d, amplitudes) / dist**2
        out[lo : lo + step] = np.einsum(
            "ts,sk->tk", g * (1.0 + m), amplitudes
        ) - np.einsum("ts,tsk->tk", g * (1.0 + 3.0 * m) * radial, d)
    return out


def _dyadic_batch(d: np.ndarray, dist: np.ndarray, k: float) -> np.ndarray:
    """Dyadic Green matrices for difference vectors d (..., 3)."""
    g = np.exp(1j * k * dist) / (4.0 * np.pi * dist)
    m = (1j * k * dist - 1.0) / (k * dist) ** 2
    rhat = d / dist[..., None]
    eye = np.eye(3)
    return (g * (1.0 + m))[..., None, None] * eye - (g * (1.0 + 3.0 * m))[
        ..., None, None
    ] * (rhat[..., :, None] * rhat[..., None, :])


def green_stack(
    points, elements, k: float, min_r: float, conjugate: bool, weights=None
) -> np.ndarray:
    """Blocks [w_m G(p, x_m; k)] side by side.  Returns (P, 3, 3M) complex."""
    points = np.asarray(points, dtype=float)
    elements = np.asarray(elements, dtype=float)
    n_p, n_m = points.shape[0], elements.shape[0]
    out = np.empty((n_p, 3, 3 * n_m), dtype=complex)
    step = _chunk(n_p, n_m)
    for lo in range(0, n_p, step):
        p = points[lo : lo + step]
        d, dist = _diffs(p, elements, min_r)
        blocks = _dyadic_batch(d, dist, k)
        if conjugate:
            np.conj(blocks, out=blocks)
        if weights is not None:
            blocks *= np.asarray(weights)[None, :, None, None]
        out[lo : lo + step] = blocks.transpose(0, 2, 1, 3).reshape(p.shape[0], 3, -1)
    return out


def psf_moments(elements, weights, points, min_r: float) -> np.ndarray:
    """k-independent coefficients of the coincident-point spread matrix.

    Returns (P, 3, 3, 3) real where [p, 0] + [p, 1]/k^2 + [p, 2]/k^4 equals
    H(y_p, y_p; k) = sum_m w_m conj(G(x_m, y_p; k)) G(x_m, y_p; k).
    """
    elements = np.asarray(elements, dtype=float)
    weights = np.asarray(weights, dtype=float)
    points = np.asarray(points, dtype=float)
    out = np.empty((points.shape[0], 3, 3, 3))
    eye = np.eye(3)
    step = _chunk(points.shape[0], elements.shape[0])
    for lo in range(0, points.shape[0], step):
        p = points[lo : lo + step]
        d, dist = _diffs(p, elements, min_r)
        g2 = weights / (4.0 * np.pi * dist) ** 2
        rhat = d / dist[..., None]
        for j, (c_iso, c_rad) in enumerate([(1.0, 0.0), (-1.0, 4.0), (1.0, 4.0)]):
            scale = g2 * dist ** (-2.0 * j)
            # c_iso (I - rr^T) + c_rad rr^T, summed over elements
            rr = np.matmul(
                (scale[..., None] * rhat).transpose(0, 2, 1), rhat
            )  # (C, 3, 3)
            out[lo : lo + step, j] = (
                c_iso * (scale.sum(axis=1)[:, None, None] * eye - rr) + c_rad * rr
            )
    return out


def psf_diag(elements, weights, points, k: float, min_r: float) -> np.ndarray:
    """H(y, y; k) at each point; real symmetric PSD, shape (P, 3, 3)."""
    mom = psf_moments(elements, weights, points, min_r)
    return mom[:, 0] + mom[:, 1] / k**2 + mom[:, 2] / k**4


def psf_pair(elements, weights, points, y2, k: float, min_r: float) -> np.ndarray:
    """H(y_p, y2; k) = sum_m w_m conj(G(x_m, y_p)) G(x_m, y2), shape (P, 3, 3)."""
    elements = np.asarray(elements, dtype=float)
    weights = np.asarray(weights, dtype=float)
    points = np.asarray(points, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    d2, dist2 = _diffs(y2[None, :], elements, min_r)
    g_fixed = weights[:, None, None] * _dyadic_batch(d2, dist2, k)[0]  # (M, 3, 3)
    out = np.empty((points.shape[0], 3, 3), dtype=complex)
    step = _chunk(points.shape[0], elements.shape[0])
    for lo in range(0, points.shape[0], step):
        p = points[lo : lo + step]
        d, dist = _diffs(p, elements, min_r)
        gp = _dyadic_batch(d, dist, k)
        np.conj(gp, out=gp)
        out[lo : lo + step] = np.einsum("cmik,mkj->cij", gp, g_fixed)
    return out

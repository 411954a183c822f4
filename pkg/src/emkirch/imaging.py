"""Vector and matrix Kirchhoff migration and cross-range recovery.

Migration back-propagates recorded data with the conjugated dyadic Green
function.  For passive data the image is the complex 3-vector

    I(y; k) = (mu w^2)^-1 int_A dx_r conj(G(x_r, y; k)) Pi(x_r; k),

for active data the complex 3x3 matrix

    I(y; k) = int_A int_A dx_r dx_s conj(G(x_r, y; k)) Pi(x_r, x_s; k)
                                     conj(G(x_s, y; k)).

Both are driven by the point-spread matrix H(y, y'; k), the aperture Gram
integral of Green functions: a synthesized dipole p at y* images to
H(y, y*; k) p, a scatterer alpha to H alpha H^T.  At coincident arguments
H is real symmetric positive semidefinite with a vanishing range-range
entry in the Fraunhofer regime, which is why only the leading 2x2
(cross-range) block of the recovery systems is solved; the full 3x3 solve
is kept as the ill-conditioned baseline.

Recovered cross-range quantities carry a depth-dependent phase
exp(i c0 omega_0 (eta* - eta)/c) (c0 = 1 passive, 2 active) that
oscillates inside the focal spot; `phase_correct_vector` /
`phase_correct_tensor` pin the phase of a pivot component to remove it.

All operations are pure per grid point; reductions over array elements run
in a fixed order, so repeated evaluations are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emcore import MediumParams
from .errors import DataMismatchError, SingularSystemError
from .forward import ActiveData, PassiveData, _guard_radius
from .kernels import green_field, green_stack, psf_diag, psf_moments, psf_pair
from .scene import ArrayGeometry, Dipole, FrequencyBand, ImagingGrid, Scatterer

# Grid points per slab in the active contraction (bounds the Green-function
# stack to slab * 3 * 3M complex entries; does not affect results).
_GRID_SLAB = 256

# Recovery blocks with condition number beyond this are flagged singular.
COND_LIMIT = 1e12


def _check_grid(grid: ImagingGrid) -> np.ndarray:
    pts = grid.points()
    if np.any(pts[:, 2] == 0.0):
        raise ValueError("imaging points must lie off the array plane")
    return pts


def _check_point(y, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    if y[2] == 0.0:
        raise ValueError(f"{name} must lie off the array plane")
    return y


@dataclass(frozen=True, eq=False)
class VectorImage:
    """Complex 3-vector Kirchhoff image on a grid (band metadata attached)."""

    grid: ImagingGrid
    band: FrequencyBand
    values: np.ndarray  # (G, 3)


@dataclass(frozen=True, eq=False)
class TensorImage:
    """Complex 3x3 Kirchhoff image on a grid."""

    grid: ImagingGrid
    band: FrequencyBand
    values: np.ndarray  # (G, 3, 3)


@dataclass(frozen=True, eq=False)
class VectorImageStack:
    """Per-band-sample vector images, shape (F, G, 3)."""

    grid: ImagingGrid
    band: FrequencyBand
    values: np.ndarray

    def at(self, freq_index: int) -> VectorImage:
        return VectorImage(
            self.grid, self.band.single(freq_index), self.values[freq_index]
        )

    def integrate(self) -> VectorImage:
        """Trapezoid band integral (the single sample itself when B = 0)."""
        w = self.band.quadrature_weights()
        return VectorImage(self.grid, self.band, np.tensordot(w, self.values, 1))


@dataclass(frozen=True, eq=False)
class TensorImageStack:
    """Per-band-sample tensor images, shape (F, G, 3, 3)."""

    grid: ImagingGrid
    band: FrequencyBand
    values: np.ndarray

    def at(self, freq_index: int) -> TensorImage:
        return TensorImage(
            self.grid, self.band.single(freq_index), self.values[freq_index]
        )

    def integrate(self) -> TensorImage:
        w = self.band.quadrature_weights()
        return TensorImage(self.grid, self.band, np.tensordot(w, self.values, 1))


# ---------------------------------------------------------------------------
# Point-spread matrices


def point_spread(y, y2, k: float, array: ArrayGeometry) -> np.ndarray:
    """H(y, y2; k) = int_A dx_r conj(G(x_r, y; k)) G(x_r, y2; k)."""
    y = _check_point(y)
    y2 = _check_point(y2, "y2")
    h = psf_pair(
        array.positions3, array.weights, y[None, :], y2, k, _guard_radius(k)
    )[0]
    return h


def _projector_stack(elements3: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = elements3 - y
    r2 = np.einsum("mk,mk->m", d, d)
    return np.eye(3) - d[:, :, None] * d[:, None, :] / r2[:, None, None]


def point_spread_fraunhofer(
    y, y2, k: float, array: ArrayGeometry, L: float
) -> np.ndarray:
    """Fraunhofer point-spread matrix Htilde(y, y2; k).

    Quadrature of exp(i k x_r . (y_cr - y2_cr) / L) P(x_r, y) P(x_r, y2)
    scaled by exp(i k (eta2 - eta)) / (4 pi L)^2.  At coincident arguments
    the integrand reduces to the (k-independent) projector average.
    """
    if L <= 0:
        raise ValueError("reference range must be positive")
    y = _check_point(y)
    y2 = _check_point(y2, "y2")
    el = array.positions3
    p1 = _projector_stack(el, y)
    p2 = p1 if y is y2 or np.array_equal(y, y2) else _projector_stack(el, y2)
    phases = np.exp(1j * k * (el[:, :2] @ (y[:2] - y2[:2])) / L)
    common = np.exp(1j * k * (y2[2] - y[2])) / (4.0 * np.pi * L) ** 2
    weighted = (array.weights * phases)[:, None, None] * p1
    return common * np.einsum("mik,mkj->ij", weighted, p2)


class PsfProvider:
    """Coincident-point spread matrices H(y, y; k) over a grid, any k.

    conj(G) G is polynomial in 1/k^2 with k-independent real coefficient
    matrices, so three quadratures per grid point serve every band sample
    exactly; band integration reduces to three scalar weights.
    """

    def __init__(self, array: ArrayGeometry, medium: MediumParams):
        self.array = array
        self.medium = medium
        self._cache: dict[int, np.ndarray] = {}

    def moments(self, grid: ImagingGrid) -> np.ndarray:
        key = id(grid)
        if key not in self._cache:
            pts = _check_grid(grid)
            self._cache[key] = psf_moments(
                self.array.positions3, self.array.weights, pts, 0.0
            )
        return self._cache[key]

    def diag(self, grid: ImagingGrid, k: float) -> np.ndarray:
        """H(y, y; k) for every grid point, real symmetric, (G, 3, 3)."""
        mom = self.moments(grid)
        return mom[:, 0] + mom[:, 1] / k**2 + mom[:, 2] / k**4

    def band_diag(self, grid: ImagingGrid, band: FrequencyBand) -> np.ndarray:
        """Band-integrated H(y, y): int dw H(y, y; w/c), real, (G, 3, 3)."""
        mom = self.moments(grid)
        ks = band.wavenumbers(self.medium)
        w = band.quadrature_weights()
        s = [float(np.sum(w * ks ** (-2.0 * j))) for j in range(3)]
        return mom[:, 0] * s[0] + mom[:, 1] * s[1] + mom[:, 2] * s[2]


# ---------------------------------------------------------------------------
# Images from data


def _require_same_array(data_array: ArrayGeometry, array: ArrayGeometry) -> None:
    if not data_array.matches(array):
        raise DataMismatchError("data was recorded on a different array geometry")


def _migrate_passive(
    fields: np.ndarray,
    pts: np.ndarray,
    k: float,
    array: ArrayGeometry,
    medium: MediumParams,
) -> np.ndarray:
    omega = k * medium.c
    weighted = array.weights[:, None] * np.conj(fields)
    acc = green_field(array.positions3, weighted, pts, k, _guard_radius(k))
    return np.conj(acc) / (medium.mu * omega**2)


def passive_image(
    data: PassiveData,
    grid: ImagingGrid,
    k: float,
    array: ArrayGeometry,
    medium: MediumParams,
) -> VectorImage:
    """Single-frequency vector Kirchhoff image of passive data."""
    _require_same_array(data.array, array)
    fi = data.band.index_of(k, medium)
    pts = _check_grid(grid)
    values = _migrate_passive(data.fields[fi], pts, k, array, medium)
    return VectorImage(grid, data.band.single(fi), values)


def passive_image_stack(
    data: PassiveData,
    grid: ImagingGrid,
    array: ArrayGeometry,
    medium: MediumParams,
) -> VectorImageStack:
    """Single-frequency images for every band sample, shape (F, G, 3)."""
    _require_same_array(data.array, array)
    pts = _check_grid(grid)
    ks = data.band.wavenumbers(medium)
    values = np.empty((data.band.n_freq, pts.shape[0], 3), dtype=complex)
    for fi, k in enumerate(ks):
        values[fi] = _migrate_passive(data.fields[fi], pts, k, array, medium)
    return VectorImageStack(grid, data.band, values)


def passive_image_band(
    data: PassiveData,
    grid: ImagingGrid,
    band: FrequencyBand,
    array: ArrayGeometry,
    medium: MediumParams,
) -> VectorImage:
    """Band-integrated vector image (trapezoid over the band samples)."""
    if not np.array_equal(band.omegas, data.band.omegas):
        raise DataMismatchError("band does not match the data band")
    return passive_image_stack(data, grid, array, medium).integrate()


def _contract_active(
    response: np.ndarray,
    pts: np.ndarray,
    k: float,
    array: ArrayGeometry,
) -> np.ndarray:
    out = np.empty((pts.shape[0], 3, 3), dtype=complex)
    el = array.positions3
    for lo in range(0, pts.shape[0], _GRID_SLAB):
        chunk = pts[lo : lo + _GRID_SLAB]
        c = green_stack(chunk, el, k, _guard_radius(k), True, array.weights)
        t = (c.reshape(-1, c.shape[2]) @ response).reshape(c.shape)
        out[lo : lo + _GRID_SLAB] = np.einsum("gia,gja->gij", t, c)
    return out


def active_image(
    data: ActiveData,
    grid: ImagingGrid,
    k: float,
    array: ArrayGeometry,
    medium: MediumParams,
) -> TensorImage:
    """Single-frequency matrix Kirchhoff image of active data."""
    _require_same_array(data.array, array)
    fi = data.band.index_of(k, medium)
    pts = _check_grid(grid)
    values = _contract_active(data.responses[fi], pts, k, array)
    return TensorImage(grid, data.band.single(fi), values)


def active_image_stack(
    data: ActiveData,
    grid: ImagingGrid,
    array: ArrayGeometry,
    medium: MediumParams,
) -> TensorImageStack:
    _require_same_array(data.array, array)
    pts = _check_grid(grid)
    ks = data.band.wavenumbers(medium)
    values = np.empty((data.band.n_freq, pts.shape[0], 3, 3), dtype=complex)
    for fi, k in enumerate(ks):
        values[fi] = _contract_active(data.responses[fi], pts, k, array)
    return TensorImageStack(grid, data.band, values)


def active_image_band(
    data: ActiveData,
    grid: ImagingGrid,
    band: FrequencyBand,
    array: ArrayGeometry,
    medium: MediumParams,
) -> TensorImage:
    """Band-integrated matrix image."""
    if not np.array_equal(band.omegas, data.band.omegas):
        raise DataMismatchError("band does not match the data band")
    return active_image_stack(data, grid, array, medium).integrate()


# ---------------------------------------------------------------------------
# Images straight from a noise-free scene
#
# For synthesized (noise-free) data the migration collapses algebraically:
# passive images equal sum_j H(y, y_j; k) p_j and active images
# sum_n H(y, y_n; k) alpha_n H(y, y_n; k)^T.  Evaluating these directly
# skips the O((3M)^2) response matrices, which is what makes extended
# targets (thousands of scatterers) tractable.  Equality with the data
# path is exact up to roundoff and is oracle-tested.


def _psf_pairs_grid(
    pts: np.ndarray,
    targets: np.ndarray,
    k: float,
    array: ArrayGeometry,
) -> np.ndarray:
    """H(y_g, t_n; k) for all grid points and targets, shape (G, 3, N, 3)."""
    el = array.positions3
    n = targets.shape[0]
    out = np.empty((pts.shape[0], 3, n, 3), dtype=complex)
    b = green_stack(targets, el, k, _guard_radius(k), False).reshape(3 * n, -1)
    for lo in range(0, pts.shape[0], _GRID_SLAB):
        chunk = pts[lo : lo + _GRID_SLAB]
        c = green_stack(chunk, el, k, _guard_radius(k), True, array.weights)
        hh = c.reshape(-1, c.shape[2]) @ b.T
        out[lo : lo + _GRID_SLAB] = hh.reshape(chunk.shape[0], 3, n, 3)
    return out


def passive_image_from_scene(
    dipoles: list[Dipole],
    grid: ImagingGrid,
    band: FrequencyBand,
    array: ArrayGeometry,
    medium: MediumParams,
) -> VectorImageStack:
    """Per-frequency passive images of a dipole scene, without data matrices."""
    pts = _check_grid(grid)
    values = np.zeros((band.n_freq, pts.shape[0], 3), dtype=complex)
    if dipoles:
        positions = np.stack([d.position for d in dipoles])
        moments = np.stack([d.polarization for d in dipoles])
        for fi, k in enumerate(band.wavenumbers(medium)):
            hh = _psf_pairs_grid(pts, positions, k, array)
            values[fi] = np.einsum("ginj,nj->gi", hh, moments)
    return VectorImageStack(grid, band, values)


def active_image_from_scene(
    scatterers: list[Scatterer],
    grid: ImagingGrid,
    band: FrequencyBand,
    array: ArrayGeometry,
    medium: MediumParams,
    scatterer_chunk: int = 1024,
) -> TensorImageStack:
    """Per-frequency active images of a scatterer scene, without data matrices."""
    pts = _check_grid(grid)
    values = np.zeros((band.n_freq, pts.shape[0], 3, 3), dtype=complex)
    if scatterers:
        positions = np.stack([s.position for s in scatterers])
        alphas = np.stack([s.polarizability for s in scatterers])
        for fi, k in enumerate(band.wavenumbers(medium)):
            for lo in range(0, positions.shape[0], scatterer_chunk):
                hh = _psf_pairs_grid(
                    pts, positions[lo : lo + scatterer_chunk], k, array
                )
                y = np.einsum("ginj,njl->ginl", hh, alphas[lo : lo + scatterer_chunk])
                values[fi] += np.einsum("ginl,gpnl->gip", y, hh)
    return TensorImageStack(grid, band, values)


# ---------------------------------------------------------------------------
# Phase correction


def _pick_pivot(first: complex, second: complex, delta: float) -> int:
    if abs(first) <= delta and abs(second) > abs(first):
        return 1
    return 0


def phase_correct_vector(p, delta: float = 0.0) -> np.ndarray:
    """Rotate the global phase so the pivot component is real nonnegative.

    Multiplies by conj(p_x) / (|p_x| + delta); if |p_x| <= delta and |p_y|
    is larger, the y component is used as pivot instead.
    """
    p = np.asarray(p, dtype=complex)
    pivot = _pick_pivot(p[0], p[1], delta)
    mag = abs(p[pivot])
    if mag + delta == 0.0:
        return p.copy()
    return (np.conj(p[pivot]) / (mag + delta)) * p


def phase_correct_tensor(alpha, delta: float = 0.0) -> np.ndarray:
    """Same correction for a 2x2 block, pivoting on the (1,1) then (2,2) entry."""
    a = np.asarray(alpha, dtype=complex)
    pivot = _pick_pivot(a[0, 0], a[1, 1], delta)
    mag = abs(a[pivot, pivot])
    if mag + delta == 0.0:
        return a.copy()
    return (np.conj(a[pivot, pivot]) / (mag + delta)) * a


def _phase_correct_batch(raw: np.ndarray, delta: float):
    """Vectorized correction over grid points.

    raw is (G, 2) or (G, 2, 2); returns (corrected, factor, pivot_index).
    """
    if raw.ndim == 2:
        first, second = raw[:, 0], raw[:, 1]
    else:
        first, second = raw[:, 0, 0], raw[:, 1, 1]
    use_second = (np.abs(first) <= delta) & (np.abs(second) > np.abs(first))
    pivot = np.where(use_second, 1, 0).astype(np.int8)
    pv = np.where(use_second, second, first)
    denom = np.abs(pv) + delta
    factor = np.ones_like(pv)
    ok = denom > 0.0
    factor[ok] = np.conj(pv[ok]) / denom[ok]
    shape = (-1,) + (1,) * (raw.ndim - 1)
    return raw * factor.reshape(shape), factor, pivot


# ---------------------------------------------------------------------------
# Recovery


@dataclass(frozen=True, eq=False)
class CrossRangeRecovery:
    """Cross-range polarization/polarizability recovered at each grid point.

    values holds the phase-corrected solution ((G, 2) vectors or (G, 2, 2)
    blocks), raw the uncorrected one; cond is the condition number of the
    solved block(s), valid flags points whose systems were invertible, and
    phase_factor / pivot_index record the applied correction.
    """

    grid: ImagingGrid
    band: FrequencyBand
    values: np.ndarray
    raw: np.ndarray
    cond: np.ndarray
    valid: np.ndarray
    phase_factor: np.ndarray
    pivot_index: np.ndarray
    delta: float

    def magnitudes(self) -> np.ndarray:
        """Euclidean/Frobenius norm of the recovered quantity per point."""
        axes = tuple(range(1, self.values.ndim))
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=axes))


def _sym2x2_eigvals(h: np.ndarray):
    """Eigenvalues of real symmetric 2x2 blocks, (lam_min, lam_max)."""
    tr = h[:, 0, 0] + h[:, 1, 1]
    disc = np.sqrt((h[:, 0, 0] - h[:, 1, 1]) ** 2 + 4.0 * h[:, 0, 1] ** 2)
    return (tr - disc) / 2.0, (tr + disc) / 2.0


def _block_cond(h: np.ndarray):
    lam_min, lam_max = _sym2x2_eigvals(h)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lam_min > 0.0, lam_max / lam_min, np.inf)
    valid = (lam_min > 0.0) & (cond <= COND_LIMIT)
    return cond, valid


def _solve2x2(h: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """h^-1 rhs for stacked real symmetric 2x2 h and complex rhs (G, 2)."""
    det = h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] ** 2
    out = np.empty_like(rhs)
    out[:, 0] = (h[:, 1, 1] * rhs[:, 0] - h[:, 0, 1] * rhs[:, 1]) / det
    out[:, 1] = (h[:, 0, 0] * rhs[:, 1] - h[:, 0, 1] * rhs[:, 0]) / det
    return out


def _inv2x2(h: np.ndarray) -> np.ndarray:
    det = h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] ** 2
    inv = np.empty_like(h)
    inv[:, 0, 0] = h[:, 1, 1] / det
    inv[:, 1, 1] = h[:, 0, 0] / det
    inv[:, 0, 1] = -h[:, 0, 1] / det
    inv[:, 1, 0] = -h[:, 1, 0] / det
    return inv


def _auto_delta(raw: np.ndarray, valid: np.ndarray, delta):
    if delta is not None:
        return float(delta)
    pivots = raw[:, 0] if raw.ndim == 2 else raw[:, 0, 0]
    mags = np.abs(pivots[valid])
    return 1e-6 * float(mags.max()) if mags.size else 0.0


def recover_polarization_crossrange(
    image: VectorImage,
    psf: PsfProvider,
    band: FrequencyBand,
    delta: float | None = None,
) -> CrossRangeRecovery:
    """Solve the band-integrated 2x2 cross-range system at every grid point.

    [int dw H_{1:2,1:2}(y, y; w/c)] p = I_{1:2}(y), then phase-correct.
    Singular blocks are flagged per point, never a global failure.
    delta defaults to 1e-6 times the largest pivot magnitude in the image.
    """
    hb = psf.band_diag(image.grid, band)[:, :2, :2]
    cond, valid = _block_cond(hb)
    raw = np.full((hb.shape[0], 2), np.nan, dtype=complex)
    raw[valid] = _solve2x2(hb[valid], image.values[valid, :2])
    delta = _auto_delta(raw, valid, delta)
    corrected, factor, pivot = _phase_correct_batch(
        np.where(valid[:, None], raw, 0.0), delta
    )
    corrected[~valid] = np.nan
    return CrossRangeRecovery(
        image.grid, band, corrected, raw, cond, valid, factor, pivot, delta
    )


def recover_polarizability_crossrange(
    images: TensorImageStack,
    psf: PsfProvider,
    band: FrequencyBand,
    delta: float | None = None,
) -> CrossRangeRecovery:
    """Frequency-averaged 2x2 polarizability recovery at every grid point.

    Per band sample solves H_{1:2,1:2}^-1 I_{1:2,1:2} H_{1:2,1:2}^-1, then
    averages with weight 1/B over the band (single-sample bands pass
    through) and phase-corrects.  cond reports the worst per-sample block
    condition number.
    """
    if not np.array_equal(band.omegas, images.band.omegas):
        raise DataMismatchError("band does not match the image stack band")
    mom = psf.moments(images.grid)[:, :, :2, :2]
    ks = band.wavenumbers(psf.medium)
    weights = band.quadrature_weights()
    scale = 1.0 / band.bandwidth if band.bandwidth > 0 else 1.0
    n_pts = mom.shape[0]
    raw = np.zeros((n_pts, 2, 2), dtype=complex)
    cond = np.zeros(n_pts)
    valid = np.ones(n_pts, dtype=bool)
    for fi, k in enumerate(ks):
        h = mom[:, 0] + mom[:, 1] / k**2 + mom[:, 2] / k**4
        cond_f, valid_f = _block_cond(h)
        cond = np.maximum(cond, cond_f)
        valid &= valid_f
        hinv = _inv2x2(np.where(valid_f[:, None, None], h, np.eye(2)))
        raw += (scale * weights[fi]) * (hinv @ images.values[fi, :, :2, :2] @ hinv)
    raw[~valid] = np.nan
    delta = _auto_delta(raw, valid, delta)
    corrected, factor, pivot = _phase_correct_batch(
        np.where(valid[:, None, None], raw, 0.0), delta
    )
    corrected[~valid] = np.nan
    return CrossRangeRecovery(
        images.grid, band, corrected, raw, cond, valid, factor, pivot, delta
    )


def recover_polarization_full(image_value, h, cond_limit: float = COND_LIMIT):
    """Ill-conditioned baseline: solve the full 3x3 system H p = I(y).

    Returns (p, condition_number); raises SingularSystemError when the
    condition number exceeds cond_limit.  The range component of the
    solution is unreliable at imaging distances by construction.
    """
    h = np.asarray(h, dtype=complex)
    b = np.asarray(image_value, dtype=complex)
    u, s, vh = np.linalg.svd(h)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    if cond > cond_limit:
        raise SingularSystemError(
            f"3x3 point-spread system is singular (cond {cond:.3e})"
        )
    p = vh.conj().T @ ((u.conj().T @ b) / s)
    return p, cond


@dataclass(frozen=True, eq=False)
class FullRecovery:
    """Per-point full 3x3 solves (the ill-conditioned baseline) on a grid."""

    grid: ImagingGrid
    band: FrequencyBand
    values: np.ndarray  # (G, 3)
    cond: np.ndarray
    valid: np.ndarray

    def magnitudes(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=1))


def recover_polarization_full_grid(
    image: VectorImage,
    psf: PsfProvider,
    band: FrequencyBand,
    cond_limit: float = COND_LIMIT,
) -> FullRecovery:
    """Grid version of the 3x3 baseline; singular points are flagged."""
    hb = psf.band_diag(image.grid, band)
    n = hb.shape[0]
    values = np.full((n, 3), np.nan, dtype=complex)
    cond = np.empty(n)
    valid = np.zeros(n, dtype=bool)
    for g in range(n):
        try:
            values[g], cond[g] = recover_polarization_full(
                image.values[g], hb[g], cond_limit
            )
            valid[g] = True
        except SingularSystemError:
            cond[g] = np.inf
    return FullRecovery(image.grid, band, values, cond, valid)

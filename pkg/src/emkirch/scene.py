"""Declarative scene description: arrays, sources, frequency bands, grids.

Array integrals over the aperture are discretized with the midpoint rule,
so the physical elements double as quadrature nodes (weight = cell area).
Frequency-band integrals use the trapezoid rule over equally spaced
samples.  All objects are immutable after construction and freely
shareable across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import emcore
from .errors import DataMismatchError


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Planar sensor layout in the z = 0 plane with quadrature weights.

    positions holds the (M, 2) in-plane element coordinates, weights the
    per-element cell areas (m^2) that discretize the aperture integral.
    """

    kind: str  # "square" or "disk"
    aperture: float  # side length (square) or radius (disk), meters
    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float)
        w = np.ascontiguousarray(self.weights, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must be (M, 2), got {pos.shape}")
        if w.shape != (pos.shape[0],):
            raise ValueError("one weight per element required")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        pos.setflags(write=False)
        w.setflags(write=False)

    @property
    def n_elements(self) -> int:
        return self.positions.shape[0]

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    @property
    def positions3(self) -> np.ndarray:
        """Element coordinates embedded in 3D (z = 0), shape (M, 3)."""
        out = np.zeros((self.n_elements, 3))
        out[:, :2] = self.positions
        return out

    def matches(self, other: "ArrayGeometry") -> bool:
        return (
            self.n_elements == other.n_elements
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.weights, other.weights)
        )


def make_square_array(a: float, n: int) -> ArrayGeometry:
    """Square aperture of side a with n x n cell-centered elements.

    Element spacing is a / n and every weight is (a / n)^2, so the weights
    sum exactly to the aperture area a^2.
    """
    if a <= 0:
        raise ValueError(f"aperture must be positive, got {a}")
    if n < 2:
        raise ValueError(f"need at least a 2x2 layout, got n={n}")
    step = a / n
    coords = (np.arange(n) + 0.5) * step - a / 2.0
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    positions = np.column_stack([xx.ravel(), yy.ravel()])
    weights = np.full(n * n, step * step)
    return ArrayGeometry("square", a, positions, weights)


def make_disk_array(a: float, n_r: int, n_theta: int) -> ArrayGeometry:
    """Disk aperture of radius a on a polar midpoint grid.

    Cell (i, j) sits at radius r_i = (i + 1/2) dr, angle th_j = (j + 1/2) dth
    and carries weight r_i dr dth.  The midpoint rule integrates r exactly,
    so the weights sum to pi a^2 up to roundoff.
    """
    if a <= 0:
        raise ValueError(f"radius must be positive, got {a}")
    if n_r < 2 or n_theta < 4:
        raise ValueError("need n_r >= 2 and n_theta >= 4")
    dr = a / n_r
    dth = 2.0 * np.pi / n_theta
    radii = (np.arange(n_r) + 0.5) * dr
    angles = (np.arange(n_theta) + 0.5) * dth
    rr, tt = np.meshgrid(radii, angles, indexing="ij")
    positions = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    weights = (rr * dr * dth).ravel()
    return ArrayGeometry("disk", a, positions, weights)


@dataclass(frozen=True, eq=False)
class FrequencyBand:
    """Equally spaced angular-frequency samples on [omega0 - B/2, omega0 + B/2].

    A degenerate band (bandwidth 0) holds the single sample omega0; band
    integrals then reduce to the single-frequency value unscaled.
    """

    omega0: float
    bandwidth: float
    omegas: np.ndarray = field(repr=False)

    def __post_init__(self):
        om = np.ascontiguousarray(self.omegas, dtype=float)
        object.__setattr__(self, "omegas", om)
        om.setflags(write=False)

    @property
    def n_freq(self) -> int:
        return self.omegas.shape[0]

    def wavenumbers(self, medium: emcore.MediumParams) -> np.ndarray:
        return self.omegas / medium.c

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoid weights for integration d(omega) over the band.

        For the degenerate single-sample band the weight is 1, so the
        "integral" is the single-frequency value itself.
        """
        n = self.n_freq
        if n == 1:
            return np.ones(1)
        dw = self.bandwidth / (n - 1)
        w = np.full(n, dw)
        w[0] = w[-1] = dw / 2.0
        return w

    def single(self, index: int) -> "FrequencyBand":
        """Degenerate one-sample band at sample `index` (for streaming loops)."""
        om = float(self.omegas[index])
        return FrequencyBand(om, 0.0, np.array([om]))

    def index_of(self, k: float, medium: emcore.MediumParams) -> int:
        """Index of the band sample whose wavenumber matches k."""
        ks = self.wavenumbers(medium)
        i = int(np.argmin(np.abs(ks - k)))
        if abs(ks[i] - k) > 1e-9 * abs(k):
            raise DataMismatchError(f"wavenumber {k} is not a band sample")
        return i


def make_band(f0: float, bandwidth_hz: float, n_freq: int) -> FrequencyBand:
    """Band of n_freq samples centered at f0 (Hz) with total width bandwidth_hz.

    omega0 = 2 pi f0, B = 2 pi bandwidth_hz; endpoints are included whenever
    n_freq >= 2.  A zero bandwidth requires n_freq = 1 and vice versa.
    """
    if f0 <= 0:
        raise ValueError(f"central frequency must be positive, got {f0}")
    if bandwidth_hz < 0:
        raise ValueError(f"bandwidth must be nonnegative, got {bandwidth_hz}")
    if bandwidth_hz >= 2.0 * f0:
        raise ValueError("bandwidth would reach nonpositive frequencies")
    if n_freq < 1:
        raise ValueError(f"need at least one sample, got {n_freq}")
    if (bandwidth_hz == 0.0) != (n_freq == 1):
        raise ValueError("zero bandwidth requires exactly one sample and vice versa")
    omega0 = 2.0 * np.pi * f0
    bw = 2.0 * np.pi * bandwidth_hz
    if n_freq == 1:
        omegas = np.array([omega0])
    else:
        omegas = omega0 + bw * np.linspace(-0.5, 0.5, n_freq)
    return FrequencyBand(omega0, bw, omegas)


@dataclass(frozen=True, eq=False)
class Dipole:
    """Radiating point dipole: position (m) and complex polarization vector."""

    position: np.ndarray
    polarization: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        pol = np.asarray(self.polarization, dtype=complex)
        if pos.shape != (3,) or pol.shape != (3,):
            raise ValueError("position and polarization must be 3-vectors")
        if np.linalg.norm(pol) == 0.0:
            raise ValueError("polarization must be nonzero")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "polarization", pol)


@dataclass(frozen=True, eq=False)
class Scatterer:
    """Point scatterer: position (m) and symmetric complex polarizability tensor."""

    position: np.ndarray
    polarizability: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        alpha = np.asarray(self.polarizability, dtype=complex)
        if pos.shape != (3,) or alpha.shape != (3, 3):
            raise ValueError("position must be a 3-vector, polarizability 3x3")
        if not emcore.is_symmetric(alpha, rtol=1e-12):
            raise ValueError("polarizability tensor must be symmetric (reciprocity)")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "polarizability", alpha)


@dataclass(frozen=True, eq=False)
class ImagingGrid:
    """Structured line/plane/volume of imaging points.

    Points are origin-anchored: index i along axis d maps to offset
    (i - counts[d] // 2) * spacings[d] along the (orthonormal) axis
    direction, so the origin itself is always a grid point.  Enumeration is
    row-major over the index tuple and bitwise reproducible.
    """

    origin: np.ndarray  # (3,)
    axes: np.ndarray  # (D, 3) orthonormal directions
    spacings: np.ndarray  # (D,)
    counts: tuple

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float)
        axes = np.asarray(self.axes, dtype=float)
        spac = np.asarray(self.spacings, dtype=float)
        counts = tuple(int(c) for c in self.counts)
        if origin.shape != (3,):
            raise ValueError("origin must be a 3-vector")
        if axes.ndim != 2 or axes.shape[1] != 3 or axes.shape[0] not in (1, 2, 3):
            raise ValueError("axes must be (D, 3) with 1 <= D <= 3")
        if spac.shape != (axes.shape[0],) or len(counts) != axes.shape[0]:
            raise ValueError("need one spacing and count per axis")
        if np.any(spac <= 0) or any(c < 1 for c in counts):
            raise ValueError("spacings must be positive and counts >= 1")
        gram = axes @ axes.T
        if not np.allclose(gram, np.eye(axes.shape[0]), atol=1e-10):
            raise ValueError("axes must be orthonormal")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "spacings", spac)
        object.__setattr__(self, "counts", counts)

    @property
    def ndim(self) -> int:
        return self.axes.shape[0]

    @property
    def n_points(self) -> int:
        return int(np.prod(self.counts))

    def axis_offsets(self, d: int) -> np.ndarray:
        n = self.counts[d]
        return (np.arange(n) - n // 2) * self.spacings[d]

    def points(self) -> np.ndarray:
        """All grid points in row-major index order, shape (G, 3)."""
        offsets = [self.axis_offsets(d) for d in range(self.ndim)]
        mesh = np.meshgrid(*offsets, indexing="ij")
        pts = np.broadcast_to(self.origin, mesh[0].shape + (3,)).copy()
        for d in range(self.ndim):
            pts += mesh[d][..., None] * self.axes[d]
        return pts.reshape(-1, 3)

    def flat_index(self, multi_index) -> int:
        return int(np.ravel_multi_index(tuple(multi_index), self.counts))

    def nearest_index(self, point) -> tuple:
        """Multi-index of the grid point nearest to `point` (clipped to bounds)."""
        rel = np.asarray(point, dtype=float) - self.origin
        idx = []
        for d in range(self.ndim):
            t = rel @ self.axes[d] / self.spacings[d] + self.counts[d] // 2
            idx.append(int(np.clip(round(t), 0, self.counts[d] - 1)))
        return tuple(idx)


def make_line_grid(origin, direction, half_span: float, spacing: float) -> ImagingGrid:
    """1D grid through `origin` along `direction`, covering +/- half_span."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    n = 2 * int(round(half_span / spacing)) + 1
    return ImagingGrid(origin, d[None, :], np.array([spacing]), (n,))


def make_plane_grid(origin, axis_u, axis_v, half_spans, spacings) -> ImagingGrid:
    """2D grid centered at `origin` spanned by orthonormal axis_u, axis_v."""
    u = np.asarray(axis_u, dtype=float)
    v = np.asarray(axis_v, dtype=float)
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    counts = tuple(2 * int(round(h / s)) + 1 for h, s in zip(half_spans, spacings))
    return ImagingGrid(origin, np.stack([u, v]), np.asarray(spacings, float), counts)

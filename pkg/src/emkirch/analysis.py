"""Quantitative validation: profiles, focal widths, ellipses, asymptotics.

Resolution is measured as the half distance between the first nulls (local
minima, falling back to 10%-of-peak crossings) bracketing the focal-spot
peak, matching the sinc-null convention of the analytic predictions:
lambda L / a in cross-range, 2 pi c / B (passive) or pi c / B (active) in
range.  2x2 real symmetric recoveries are summarized as ellipses whose
semi-axes are the absolute eigenvalues and whose angle is the major-axis
direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import emcore
from .imaging import TensorImage, VectorImage, point_spread_fraunhofer
from .scene import ArrayGeometry


@dataclass(frozen=True)
class ProfileLine:
    """Scan line: origin (3,), unit direction (3,), scalar offsets (n,)."""

    origin: np.ndarray
    direction: np.ndarray
    offsets: np.ndarray

    def points(self) -> np.ndarray:
        return self.origin[None, :] + self.offsets[:, None] * self.direction[None, :]


def make_profile_line(origin, direction, half_span: float, n: int) -> ProfileLine:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    offsets = np.linspace(-half_span, half_span, n)
    return ProfileLine(np.asarray(origin, dtype=float), d, offsets)


def profile(image: VectorImage | TensorImage, line: ProfileLine):
    """Image magnitude along a line, resampled by nearest grid point.

    Returns (positions, magnitudes) with positions the monotone scalar
    offsets along the line and magnitudes the Euclidean (vector image) or
    Frobenius (tensor image) norms.
    """
    if line.offsets.size == 0:
        raise ValueError("profile line has no sample points")
    axes = tuple(range(1, image.values.ndim))
    mags = np.sqrt(np.sum(np.abs(image.values) ** 2, axis=axes))
    grid = image.grid
    out = np.empty(line.offsets.size)
    for i, pt in enumerate(line.points()):
        out[i] = mags[grid.flat_index(grid.nearest_index(pt))]
    return np.asarray(line.offsets, dtype=float), out


def focal_width(positions, magnitudes) -> float:
    """Half the distance between the first nulls bracketing the peak.

    Nulls are the first local minima on each side of the (unique, interior)
    maximum; where the scan does not sample a null, the 10%-of-peak
    crossing (linearly interpolated) is used instead.
    """
    pos = np.asarray(positions, dtype=float)
    mag = np.asarray(magnitudes, dtype=float)
    if pos.ndim != 1 or pos.shape != mag.shape or pos.size < 5:
        raise ValueError("need matching 1D positions/magnitudes with >= 5 samples")
    if np.any(np.diff(pos) <= 0):
        raise ValueError("positions must be strictly increasing")
    peak = int(np.argmax(mag))
    if peak == 0 or peak == mag.size - 1:
        raise ValueError("profile peak lies on the scan boundary")
    floor = 0.1 * mag[peak]

    def _null(direction: int) -> float:
        i = peak
        while 0 < i + direction < mag.size - 1:
            i += direction
            if mag[i] <= mag[i - direction] and mag[i] <= mag[i + direction]:
                return pos[i]
        # no sampled local minimum: fall back to the 10%-of-peak crossing
        i = peak
        while 0 <= i + direction <= mag.size - 1:
            i += direction
            if mag[i] <= floor:
                lo, hi = i - direction, i
                t = (floor - mag[lo]) / (mag[hi] - mag[lo])
                return pos[lo] + t * (pos[hi] - pos[lo])
        raise ValueError("profile does not bracket a focal spot on one side")

    return (_null(+1) - _null(-1)) / 2.0


@dataclass(frozen=True)
class EllipseParams:
    """Ellipse summary of a 2x2 real symmetric matrix.

    semi_axes are the absolute eigenvalues (descending); angle is the
    major-axis direction in (-pi/2, pi/2]; eigenvalues keeps the signed
    values in the same order so the matrix can be reconstructed as
    R(angle) diag(eigenvalues) R(angle)^T.
    """

    semi_axes: tuple
    angle: float
    eigenvalues: tuple

    def reconstruct(self) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        rot = np.array([[c, -s], [s, c]])
        return rot @ np.diag(self.eigenvalues) @ rot.T


def ellipse_of(matrix) -> EllipseParams:
    """Eigen-decomposition of a 2x2 real symmetric matrix as an ellipse."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    scale = np.abs(m).max()
    if abs(m[0, 1] - m[1, 0]) > 1e-10 * max(scale, 1e-300):
        raise ValueError("matrix must be symmetric")
    if scale == 0.0:
        return EllipseParams((0.0, 0.0), 0.0, (0.0, 0.0))
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-np.abs(vals))
    vals = vals[order]
    major = vecs[:, order[0]]
    angle = float(np.arctan2(major[1], major[0]))
    if angle <= -np.pi / 2:
        angle += np.pi
    elif angle > np.pi / 2:
        angle -= np.pi
    return EllipseParams(
        (float(abs(vals[0])), float(abs(vals[1]))),
        angle,
        (float(vals[0]), float(vals[1])),
    )


def angle_between(u, v) -> float:
    """Unsigned angle (radians) between two real vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    denom = np.linalg.norm(u) * np.linalg.norm(v)
    if denom == 0.0:
        raise ValueError("angle undefined for zero vectors")
    return float(np.arccos(np.clip(u @ v / denom, -1.0, 1.0)))


def axis_angle_distance(a: float, b: float) -> float:
    """Distance between two undirected axis angles, modulo pi."""
    d = abs(a - b) % np.pi
    return min(d, np.pi - d)


@dataclass(frozen=True)
class ResolutionReport:
    """Measured focal widths against the analytic predictions."""

    cross_range_width: float
    range_width: float
    predicted_cross: float  # lambda L / a
    predicted_range: float  # 2 pi c / B (passive) or pi c / B (active)
    cross_ratio: float
    range_ratio: float


def resolution_report(
    cross_width: float,
    range_width: float,
    wavelength: float,
    aperture: float,
    distance: float,
    bandwidth: float,
    c: float,
    active: bool = False,
) -> ResolutionReport:
    pred_cross = wavelength * distance / aperture
    pred_range = (np.pi if active else 2.0 * np.pi) * c / bandwidth
    return ResolutionReport(
        cross_width,
        range_width,
        pred_cross,
        pred_range,
        cross_width / pred_cross,
        range_width / pred_range,
    )


@dataclass(frozen=True)
class DiskPsfReport:
    """Fraunhofer disk point-spread matrix against its analytic limit.

    discrepancy = || (16 pi L^2 / a^2) Htilde(y, y; k) - diag(1, 1, 0) ||_F,
    expected to scale like (a/L)^2 plus b/L off-center terms.
    """

    discrepancy: float
    scaled_matrix: np.ndarray
    aperture_scale: float  # (a / L)^2
    offcenter_scale: float  # b / L


def validate_disk_psf(array: ArrayGeometry, y_star, k: float, L: float) -> DiskPsfReport:
    if array.kind != "disk":
        raise ValueError("disk point-spread validation requires a disk array")
    y = np.asarray(y_star, dtype=float)
    h = point_spread_fraunhofer(y, y, k, array, L)
    scaled = (16.0 * np.pi * L**2 / array.aperture**2) * h.real
    target = np.diag([1.0, 1.0, 0.0])
    return DiskPsfReport(
        float(np.linalg.norm(scaled - target)),
        scaled,
        (array.aperture / L) ** 2,
        float(np.linalg.norm(y[:2])) / L,
    )


@dataclass(frozen=True)
class FraunhoferReport:
    """Worst-case paraxial phase/amplitude errors over (element, point) pairs."""

    max_phase_error: float  # radians
    max_amplitude_error: float  # | L / ||x - y|| - 1 |
    theta_b: float  # k b^2 / L
    aperture_phase_scale: float  # k a^4 / L^3


def validate_fraunhofer(
    array: ArrayGeometry, window_points, k: float, L: float
) -> FraunhoferReport:
    """Compare exact Green phase/amplitude to the paraxial expansion."""
    pts = np.atleast_2d(np.asarray(window_points, dtype=float))
    el = array.positions3
    max_phase = 0.0
    max_amp = 0.0
    b = 0.0
    for y in pts:
        d = el - y
        dist = np.sqrt(np.einsum("mk,mk->m", d, d))
        exact_phase = k * dist
        xr2 = np.einsum("mk,mk->m", el[:, :2], el[:, :2])
        parax = k * L + k * xr2 / (2 * L) - k * (el[:, :2] @ y[:2]) / L + k * (y[2] - L)
        max_phase = max(max_phase, float(np.abs(exact_phase - parax).max()))
        max_amp = max(max_amp, float(np.abs(L / dist - 1.0).max()))
        b = max(b, float(np.linalg.norm(y[:2])))
    return FraunhoferReport(
        max_phase,
        max_amp,
        k * b**2 / L,
        k * array.aperture**4 / L**3,
    )


__all__ = [
    "DiskPsfReport",
    "EllipseParams",
    "FraunhoferReport",
    "ProfileLine",
    "ResolutionReport",
    "angle_between",
    "axis_angle_distance",
    "ellipse_of",
    "focal_width",
    "make_profile_line",
    "profile",
    "resolution_report",
    "validate_disk_psf",
    "validate_fraunhofer",
]

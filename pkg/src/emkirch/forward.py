"""Forward synthesis of passive and active array measurements.

Passive data are the fields radiated by point dipoles and recorded at
every array element,

    Pi(x_r; k) = mu w^2 sum_j G((x_r, 0), y_j; k) p_j,

and active data are the Born-approximation array response of point
scatterers for every source/receiver element pair,

    Pi(x_r, x_s; k) = sum_n G(x_r, y_n; k) alpha_n G(y_n, x_s; k).

Additive measurement noise follows the average-power convention: per
complex entry, independent circular Gaussian with variance eps * p_avg,
where eps = 10^(SNR_dB / 10) and p_avg is the mean squared entry modulus
of the noise-free data over all elements and band samples (so positive
SNR_dB means the noise power exceeds the signal power).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emcore import MediumParams
from .errors import DataMismatchError
from .kernels import green_field, green_stack
from .scene import ArrayGeometry, Dipole, FrequencyBand, Scatterer


def _guard_radius(k: float) -> float:
    return 1e-9 * (2.0 * np.pi / k)


def _check_off_plane(positions: np.ndarray, what: str) -> None:
    if np.any(positions[:, 2] <= 0.0):
        raise ValueError(f"all {what} must lie strictly above the array plane (z > 0)")


@dataclass(frozen=True, eq=False)
class PassiveData:
    """Electric-field samples at every element, per band sample.

    fields has shape (n_freq, n_elements, 3).
    """

    array: ArrayGeometry
    band: FrequencyBand
    fields: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.fields, dtype=complex)
        expected = (self.band.n_freq, self.array.n_elements, 3)
        if f.shape != expected:
            raise DataMismatchError(f"fields must have shape {expected}, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise DataMismatchError("fields contain non-finite entries")
        object.__setattr__(self, "fields", f)


@dataclass(frozen=True, eq=False)
class ActiveData:
    """Array response matrices, per band sample.

    responses has shape (n_freq, 3M, 3M) where M is the element count;
    rows/columns are grouped in 3-blocks per receiver/source element
    (entry (3r + i, 3s + j) is component (i, j) of Pi(x_r, x_s; k)).
    """

    array: ArrayGeometry
    band: FrequencyBand
    responses: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.responses, dtype=complex)
        n3 = 3 * self.array.n_elements
        expected = (self.band.n_freq, n3, n3)
        if r.shape != expected:
            raise DataMismatchError(
                f"responses must have shape {expected}, got {r.shape}"
            )
        object.__setattr__(self, "responses", r)

    def block(self, freq_index: int, receiver: int, source: int) -> np.ndarray:
        """The 3x3 response Pi(x_r, x_s; k) for one element pair."""
        r, s = 3 * receiver, 3 * source
        return self.responses[freq_index, r : r + 3, s : s + 3]


def synthesize_passive(
    dipoles: list[Dipole],
    array: ArrayGeometry,
    band: FrequencyBand,
    medium: MediumParams,
) -> PassiveData:
    """Field of the dipole family at every element and band sample."""
    fields = np.zeros((band.n_freq, array.n_elements, 3), dtype=complex)
    if dipoles:
        positions = np.stack([d.position for d in dipoles])
        _check_off_plane(positions, "dipoles")
        moments = np.stack([d.polarization for d in dipoles])
        elements = array.positions3
        for fi, omega in enumerate(band.omegas):
            k = medium.wavenumber(omega)
            prefactor = medium.mu * omega**2
            fields[fi] = prefactor * green_field(
                positions, moments, elements, k, _guard_radius(k)
            )
    return PassiveData(array, band, fields)


def incident_field(
    p_dist: np.ndarray,
    array: ArrayGeometry,
    x,
    k: float,
    medium: MediumParams,
) -> np.ndarray:
    """Field at x radiated by the array dipole distribution p_dist.

    p_dist maps element index to a complex 3-vector, shape (M, 3); the
    aperture integral is the weighted element sum
    mu w^2 sum_s weight_s G(x, x_s; k) p(x_s).
    """
    p = np.asarray(p_dist, dtype=complex)
    if p.shape != (array.n_elements, 3):
        raise DataMismatchError(
            f"p_dist must have shape ({array.n_elements}, 3), got {p.shape}"
        )
    x = np.asarray(x, dtype=float)
    if x[2] == 0.0:
        raise ValueError("evaluation point must lie off the array plane")
    omega = k * medium.c
    weighted = array.weights[:, None] * p
    field = green_field(array.positions3, weighted, x[None, :], k, _guard_radius(k))
    return medium.mu * omega**2 * field[0]


def synthesize_active(
    scatterers: list[Scatterer],
    array: ArrayGeometry,
    band: FrequencyBand,
    medium: MediumParams,
) -> ActiveData:
    """Born array response of the scatterer family for all element pairs.

    Memory scales as n_freq * (3M)^2; stream one band sample at a time
    (band.single) when the full block is too large to hold.
    """
    n3 = 3 * array.n_elements
    responses = np.zeros((band.n_freq, n3, n3), dtype=complex)
    if scatterers:
        positions = np.stack([s.position for s in scatterers])
        _check_off_plane(positions, "scatterers")
        alphas = np.stack([s.polarizability for s in scatterers])
        elements = array.positions3
        for fi, omega in enumerate(band.omegas):
            k = medium.wavenumber(omega)
            # B rows are blocks G(y_n, x_s); A = B^T by symmetry of G.
            b = green_stack(positions, elements, k, _guard_radius(k), False)
            b = b.reshape(3 * len(scatterers), n3)
            alpha_b = np.einsum("nij,njs->nis", alphas, b.reshape(-1, 3, n3))
            responses[fi] = b.T @ alpha_b.reshape(-1, n3)
    return ActiveData(array, band, responses)


def _noise_rng(seed: int, freq_index: int) -> np.random.Generator:
    # Counter-based Philox keyed by (seed, frequency index): independent,
    # reproducible streams regardless of evaluation order.
    return np.random.Generator(np.random.Philox(key=[seed, freq_index]))


def _average_power(blocks: np.ndarray) -> float:
    p_avg = float(np.mean(np.abs(blocks) ** 2))
    if p_avg == 0.0:
        raise ValueError("all-zero data: noise scale p_avg is undefined")
    return p_avg


def add_noise(data: ActiveData, snr_db: float, seed: int) -> ActiveData:
    """Active data plus independent complex Gaussian measurement noise.

    Per entry the noise is circular with variance eps * p_avg
    (eps = 10^(snr_db/10)); real and imaginary parts each carry half.
    Frequencies get independent streams keyed by (seed, frequency index).
    """
    eps = 10.0 ** (snr_db / 10.0)
    p_avg = _average_power(data.responses)
    sigma = np.sqrt(eps * p_avg / 2.0)
    noisy = np.empty_like(data.responses)
    shape = data.responses.shape[1:]
    for fi in range(data.band.n_freq):
        rng = _noise_rng(seed, fi)
        w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        noisy[fi] = data.responses[fi] + sigma * w
    return ActiveData(data.array, data.band, noisy)


def add_noise_passive(data: PassiveData, snr_db: float, seed: int) -> PassiveData:
    """Same noise recipe applied to the per-element field samples."""
    eps = 10.0 ** (snr_db / 10.0)
    p_avg = _average_power(data.fields)
    sigma = np.sqrt(eps * p_avg / 2.0)
    noisy = np.empty_like(data.fields)
    shape = data.fields.shape[1:]
    for fi in range(data.band.n_freq):
        rng = _noise_rng(seed, fi)
        w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        noisy[fi] = data.fields[fi] + sigma * w
    return PassiveData(data.array, data.band, noisy)

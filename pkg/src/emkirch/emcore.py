"""Electromagnetic Green-function kernels and small complex linear algebra.

The free-space time-harmonic Maxwell point response is the 3x3 dyadic

    G(x, y; k) = g(x, y; k) [ (1 + m(kr)) I - (1 + 3 m(kr)) r r^T / r^2 ],

with r = x - y, r = ||r||, m(t) = (i t - 1) / t^2 and g the scalar
(acoustic) Green function exp(i k r) / (4 pi r).  The dyadic is a normal,
symmetric matrix with eigenvalue -2 m(kr) g on the radial direction and
(1 + m(kr)) g on the transverse plane, so its condition number grows like
kr / 2 at large kr: the radial (range) component of any source is carried
by an ever weaker channel.

Far from the source the dyadic factorizes as g(x, y; k) * P(x, y) with P
the transverse orthogonal projector, and the scalar g itself admits the
usual paraxial (Fraunhofer) phase expansion around a reference range L.
Both approximations are provided here so higher layers can validate them
numerically.

All lengths are meters, angular frequencies rad/s.  The default medium is
vacuum with c = 3e8 m/s and normalized permeability mu = 1 (the mu omega^2
source factor cancels identically in every imaging formula).

Every function is pure; no shared mutable state, safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularEvaluationError

#: Propagation speed of the default vacuum medium (m/s).
C_VACUUM = 3.0e8

#: Evaluations closer to the source than this many wavelengths are rejected.
MIN_SEPARATION_WAVELENGTHS = 1e-9


@dataclass(frozen=True)
class MediumParams:
    """Homogeneous background medium.

    c is the propagation speed (m/s), mu the (normalized) permeability.
    The permittivity follows from c = (epsilon mu)^(-1/2).
    """

    c: float = C_VACUUM
    mu: float = 1.0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"wave speed must be positive, got {self.c}")
        if self.mu <= 0:
            raise ValueError(f"permeability must be positive, got {self.mu}")

    @property
    def epsilon(self) -> float:
        return 1.0 / (self.mu * self.c**2)

    def wavenumber(self, omega: float) -> float:
        """k = omega / c for angular frequency omega (rad/s)."""
        if omega <= 0:
            raise ValueError(f"angular frequency must be positive, got {omega}")
        return omega / self.c


def _as_point(x, name: str) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {p.shape}")
    return p


def _separation(x, y, k: float | None) -> tuple[np.ndarray, float]:
    """Difference vector and distance, guarded against (near-)coincident points."""
    xv = _as_point(x, "x")
    yv = _as_point(y, "y")
    r = xv - yv
    dist = float(np.linalg.norm(r))
    if dist == 0.0:
        raise SingularEvaluationError("evaluation at coincident points")
    if k is not None and k > 0:
        wavelength = 2.0 * np.pi / k
        if dist < MIN_SEPARATION_WAVELENGTHS * wavelength:
            raise SingularEvaluationError(
                f"separation {dist:.3e} m is below the singularity guard "
                f"({MIN_SEPARATION_WAVELENGTHS:g} wavelengths)"
            )
    return r, dist


def acoustic_green(x, y, k: float) -> complex:
    """Scalar free-space Green function exp(i k ||x-y||) / (4 pi ||x-y||).

    k = 0 is allowed and gives the static kernel 1 / (4 pi ||x-y||).
    """
    if k < 0:
        raise ValueError(f"wavenumber must be nonnegative, got {k}")
    _, dist = _separation(x, y, k if k > 0 else None)
    return complex(np.exp(1j * k * dist) / (4.0 * np.pi * dist))


def _m_factor(t: float) -> complex:
    """m(t) = (i t - 1) / t^2, the near-field weight of the dyadic kernel."""
    return (1j * t - 1.0) / (t * t)


def dyadic_green(x, y, k: float) -> np.ndarray:
    """3x3 dyadic Green function of the time-harmonic Maxwell operator.

    Returns g(x,y;k) [ (1 + m(kr)) I - (1 + 3 m(kr)) r r^T / r^2 ].
    Requires k > 0 (the m factor is undefined at zero frequency).
    """
    if k <= 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    r, dist = _separation(x, y, k)
    g = np.exp(1j * k * dist) / (4.0 * np.pi * dist)
    m = _m_factor(k * dist)
    rhat = r / dist
    return g * ((1.0 + m) * np.eye(3) - (1.0 + 3.0 * m) * np.outer(rhat, rhat))


def dyadic_green_eigen(k: float, r: float) -> tuple[complex, complex]:
    """Eigenvalues (radial, transverse) of the dyadic Green function.

    lambda1 = -2 m(kr) g acts on the radial direction (multiplicity 1),
    lambda2 = (1 + m(kr)) g on its orthogonal complement (multiplicity 2),
    where g = exp(i k r) / (4 pi r).
    """
    if k <= 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    if r <= 0:
        raise ValueError(f"separation must be positive, got {r}")
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    m = _m_factor(k * r)
    return complex(-2.0 * m * g), complex((1.0 + m) * g)


def green_condition_number(k: float, r: float) -> float:
    """|(m(kr) + 1) / (2 m(kr))|, the transverse/radial eigenvalue ratio.

    Grows like kr / 2 for kr >> 1; this is what makes full 3-component
    recovery ill-posed at imaging distances.
    """
    if k <= 0 or r <= 0:
        raise ValueError("k and r must be positive")
    m = _m_factor(k * r)
    return float(abs((m + 1.0) / (2.0 * m)))


def projector(x, y) -> np.ndarray:
    """Orthogonal projector onto the plane transverse to x - y.

    P = I - (x-y)(x-y)^T / ||x-y||^2; real symmetric, idempotent, rank 2.
    """
    r, dist = _separation(x, y, None)
    rhat = r / dist
    return np.eye(3) - np.outer(rhat, rhat)


def paraxial_green(x_r, y, k: float, L: float) -> complex:
    """Fraunhofer (paraxial) approximation of the scalar Green function.

    For a receiver at (x_r, 0) in the z = 0 plane and a point
    y = (y_cr, L + eta) near the reference range L, the distance expands as

        ||x_r - y|| = L + ||x_r||^2 / 2L - x_r . y_cr / L + eta + h.o.t.

    and the amplitude is frozen at 1 / (4 pi L):

        Gtilde = exp[i (kL + k||x_r||^2 / 2L - k x_r . y_cr / L + k eta)] / (4 pi L).
    """
    if L <= 0:
        raise ValueError(f"reference range must be positive, got {L}")
    if k <= 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    xr = np.asarray(x_r, dtype=float)
    if xr.shape != (2,):
        raise ValueError(f"x_r must be a 2-vector in the array plane, got {xr.shape}")
    yv = _as_point(y, "y")
    eta = yv[2] - L
    phase = k * L + k * (xr @ xr) / (2.0 * L) - k * (xr @ yv[:2]) / L + k * eta
    return complex(np.exp(1j * phase) / (4.0 * np.pi * L))


def frobenius(mat) -> float:
    """Frobenius norm of a complex matrix."""
    return float(np.linalg.norm(np.asarray(mat)))


def is_symmetric(mat, rtol: float = 1e-12) -> bool:
    """Whether M^T = M entrywise within a relative Frobenius tolerance."""
    m = np.asarray(mat)
    scale = np.linalg.norm(m)
    if scale == 0.0:
        return True
    return bool(np.linalg.norm(m - m.T) <= rtol * scale)

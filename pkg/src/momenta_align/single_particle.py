"""Free 1-D Gaussian wavepacket: exact evolution, numeric propagation, moments.

The closed form is the oracle: a packet of initial width sigma0 and mean
momentum k keeps a Gaussian density with centroid r0 + (k/m) t and width
sigma(t) = sigma0 sqrt(1 + (t / (2 m sigma0^2))^2). The numeric path builds
the same state from its momentum representation with the oscillation-aware
trapezoid rule, which the closed form then checks pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DomainError, ResourceError
from .quadrature import QuadratureSpec, axis_point_count, _trapezoid_weights

_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class GaussianPacket1D:
    """Minimum-uncertainty packet: density width sigma0, mean momentum k."""

    sigma0: float
    k: float
    m: float
    r0: float = 0.0

    def __post_init__(self):
        if not (self.sigma0 > 0.0):
            raise DomainError(f"sigma0 must be positive, got {self.sigma0!r}")
        if not (self.m > 0.0):
            raise DomainError(f"m must be positive, got {self.m!r}")

    @property
    def v(self) -> float:
        return self.k / self.m


def sigma_at(packet: GaussianPacket1D, t: float) -> float:
    """Density width after free spreading for time t."""
    s0 = packet.sigma0
    return s0 * math.sqrt(1.0 + (t / (2.0 * packet.m * s0 * s0)) ** 2)


def centroid_at(packet: GaussianPacket1D, t: float) -> float:
    return packet.r0 + packet.v * t


def gaussian_closed_form(packet: GaussianPacket1D, x, t: float) -> np.ndarray:
    """Exact free evolution of the packet; |psi|^2 is a normalized Gaussian."""
    if t < 0.0:
        raise DomainError(f"t must be nonnegative, got {t!r}")
    x = np.asarray(x, dtype=float)
    s0 = packet.sigma0
    alpha = 1.0 + 1j * t / (2.0 * packet.m * s0 * s0)
    prefactor = (2.0 * math.pi * s0 * s0) ** -0.25 / np.sqrt(alpha)
    drift = x - packet.r0 - packet.v * t
    phase = packet.k * (x - packet.r0) - packet.k ** 2 * t / (2.0 * packet.m)
    return prefactor * np.exp(1j * phase - drift * drift / (4.0 * s0 * s0 * alpha))


def default_grid(packet: GaussianPacket1D, t: float, n_points: int = 4096) -> np.ndarray:
    """Grid spanning 8 spread widths around the predicted centroid."""
    n_points = max(int(n_points), 1024)
    width = 8.0 * sigma_at(packet, t)
    center = centroid_at(packet, t)
    return np.linspace(center - width, center + width, n_points)


def propagate_numeric(packet: GaussianPacket1D, x_grid, t: float,
                      spec: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """psi on x_grid from the momentum-space integral of the initial packet.

    The grid must cover truncationSigmas current widths around the centroid.
    """
    if t < 0.0:
        raise DomainError(f"t must be nonnegative, got {t!r}")
    x_grid = np.asarray(x_grid, dtype=float)
    center = centroid_at(packet, t)
    reach = spec.truncation_sigmas * sigma_at(packet, t)
    if x_grid[0] > center - reach or x_grid[-1] < center + reach:
        raise CoverageError(
            f"x grid must cover {spec.truncation_sigmas} widths around {center}")

    s0 = packet.sigma0
    sigma_f = 1.0 / (s0 * math.sqrt(2.0))  # width of the momentum amplitude
    p_lo = packet.k - spec.truncation_sigmas * sigma_f
    p_hi = packet.k + spec.truncation_sigmas * sigma_f
    rate = (float(np.max(np.abs(x_grid))) + abs(packet.r0)
            + max(abs(p_lo), abs(p_hi)) * t / packet.m)
    n = 2 * axis_point_count(p_hi - p_lo, rate, spec, sigma_f) - 1
    if n > spec.max_grid_points:
        raise ResourceError(f"momentum grid needs {n} points",
                            required=n, limit=spec.max_grid_points)
    p = np.linspace(p_lo, p_hi, n)
    weights = _trapezoid_weights(p)
    f_p = ((2.0 * math.pi * s0 * s0) ** -0.25 * math.sqrt(4.0 * math.pi * s0 * s0)
           / (2.0 * math.pi) * np.exp(-s0 * s0 * (p - packet.k) ** 2)
           * np.exp(-1j * p * packet.r0))
    coeff = weights * f_p

    psi = np.empty(x_grid.size, dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // n)
    for i0 in range(0, x_grid.size, chunk):
        xc = x_grid[i0:i0 + chunk, None]
        phase = p[None, :] * xc - (p[None, :] ** 2 / (2.0 * packet.m)) * t
        psi[i0:i0 + chunk] = np.exp(1j * phase) @ coeff
    return psi


def track_centroid_width(x_grid, amplitudes):
    """First moment and RMS width of |psi|^2 on the grid.

    Requires essentially all of the density mass to lie inside the grid; the
    proxy used is that the edge densities are below 1e-4 of the peak, which
    for a Gaussian bounds the truncated tails well under 0.1%.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    density = np.abs(np.asarray(amplitudes)) ** 2
    peak = float(density.max())
    if peak <= 0.0 or max(density[0], density[-1]) > 1e-4 * peak:
        raise CoverageError("density mass is not contained in the grid")
    weights = _trapezoid_weights(x_grid)
    mass = float(weights @ density)
    mean = float(weights @ (x_grid * density)) / mass
    var = float(weights @ ((x_grid - mean) ** 2 * density)) / mass
    return mean, math.sqrt(var)

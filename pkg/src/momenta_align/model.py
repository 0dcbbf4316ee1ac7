"""Physical quantities, coordinate reductions and the source spectrum.

Natural units are used everywhere: hbar = 1 and h = 2*pi. All particles are
nonrelativistic, E = p^2 / (2 m).

The decaying system is modeled by a rotationally invariant momentum/energy
amplitude

    F(P, E) = A * exp(-|P|^2 / (2 deltaP0^2)) * exp(-(E - E0)^2 / (2 deltaE^2))

for E >= 0, with zero phase, so the source is localized at the coordinate
origin and the total momentum is centered on zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

HBAR = 1.0
H = 2.0 * math.pi


@dataclass(frozen=True)
class UnitsConvention:
    """Fixed natural-unit convention; h is always exactly 2*pi*hbar."""

    hbar: float = HBAR
    h: float = H

    def __post_init__(self):
        if self.h != 2.0 * math.pi * self.hbar:
            raise DomainError("h must equal 2*pi*hbar exactly")


def _require_positive(name, value):
    if not (value > 0.0) or not math.isfinite(value):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class PairKinematics:
    """Masses and derived decay kinematics of a two-fragment breakup.

    p0 is the magnitude of each fragment's momentum when the released energy
    is exactly E0: p0 = sqrt(2 * mu * E0), and v_j = p0 / m_j are the
    classical fragment speeds.
    """

    m1: float
    m2: float
    M: float
    mu: float
    E0: float
    p0: float
    v1: float
    v2: float

    @property
    def relative_speed(self) -> float:
        return self.v1 + self.v2


def make_kinematics(m1: float, m2: float, E0: float) -> PairKinematics:
    _require_positive("m1", m1)
    _require_positive("m2", m2)
    _require_positive("E0", E0)
    M = m1 + m2
    mu = m1 * m2 / M
    p0 = math.sqrt(2.0 * mu * E0)
    return PairKinematics(m1=m1, m2=m2, M=M, mu=mu, E0=E0, p0=p0,
                          v1=p0 / m1, v2=p0 / m2)


@dataclass(frozen=True)
class SourceSpectrum:
    """Gaussian momentum/energy amplitude of the decaying system.

    delta_p0 is the width per Cartesian component of the total momentum,
    delta_e the width of the total energy about E0. The amplitude prefactor
    is an arbitrary positive scale (probability normalization is a separate
    convention, see pair_amplitude.normalized_amplitude). The phase is
    identically zero.
    """

    delta_p0: float
    E0: float
    delta_e: float
    amplitude: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        _require_positive("deltaP0", self.delta_p0)
        _require_positive("E0", self.E0)
        _require_positive("deltaE", self.delta_e)
        if self.amplitude < 0.0 or not math.isfinite(self.amplitude):
            raise DomainError(f"amplitude must be >= 0, got {self.amplitude!r}")
        if self.phase != 0.0:
            raise DomainError("the spectrum phase is fixed at zero")

    def momentum_factor(self, p_total):
        """exp(-|P|^2 / (2 deltaP0^2)) as a function of |P|."""
        p_total = np.asarray(p_total, dtype=float)
        return np.exp(-p_total * p_total / (2.0 * self.delta_p0 ** 2))

    def energy_factor(self, energy):
        """exp(-(E - E0)^2 / (2 deltaE^2)) for E >= 0, zero for E < 0."""
        energy = np.asarray(energy, dtype=float)
        out = np.exp(-(energy - self.E0) ** 2 / (2.0 * self.delta_e ** 2))
        return np.where(energy >= 0.0, out, 0.0)

    def value(self, p_total, energy):
        return self.amplitude * self.momentum_factor(p_total) * self.energy_factor(energy)


def default_spectrum(kin: PairKinematics, delta_p0: float = 0.05,
                     delta_e: float | None = None) -> SourceSpectrum:
    """Spectrum with the documented defaults: deltaE = 0.05 * E0."""
    if delta_e is None:
        delta_e = 0.05 * kin.E0
    return SourceSpectrum(delta_p0=delta_p0, E0=kin.E0, delta_e=delta_e)


@dataclass(frozen=True)
class SphericalDirection:
    """Unit direction given by colatitude theta in [0, pi] and azimuth phi in [0, 2*pi)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise DomainError(f"theta must lie in [0, pi], got {self.theta!r}")
        if not (0.0 <= self.phi < 2.0 * math.pi):
            raise DomainError(f"phi must lie in [0, 2*pi), got {self.phi!r}")

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi),
                         st * math.sin(self.phi),
                         math.cos(self.theta)])

    @classmethod
    def from_vector(cls, v) -> "SphericalDirection":
        v = np.asarray(v, dtype=float)
        r = float(np.linalg.norm(v))
        if r == 0.0:
            raise DomainError("cannot take the direction of the zero vector")
        theta = math.acos(max(-1.0, min(1.0, v[2] / r)))
        phi = math.atan2(v[1], v[0]) % (2.0 * math.pi)
        return cls(theta=theta, phi=phi)


def cos_between(theta1, phi1, theta2, phi2):
    """Cosine of the angle between two directions in spherical coordinates.

    cos = cos(theta1) cos(theta2) + sin(theta1) sin(theta2) cos(phi1 - phi2)
    """
    return (np.cos(theta1) * np.cos(theta2)
            + np.sin(theta1) * np.sin(theta2) * np.cos(np.asarray(phi1) - np.asarray(phi2)))


def _vector_angle(u: np.ndarray, v: np.ndarray) -> float:
    # atan2(|u x v|, u.v) is numerically stable near 0 and pi, which a direct
    # arccos of the spherical-trig cosine is not.
    cross = np.cross(u, v)
    return float(math.atan2(np.linalg.norm(cross), float(np.dot(u, v))))


def opening_angle(d1: SphericalDirection, d2: SphericalDirection) -> float:
    """Angle in [0, pi] between two directions; its cosine equals cos_between."""
    return _vector_angle(d1.unit_vector(), d2.unit_vector())


@dataclass(frozen=True)
class ReducedCoordinates:
    """The two scalars the pair amplitude depends on, plus the opening angle.

    rw = |m1 r1 + m2 r2| / M is conjugate to the total momentum, rho = |r1 - r2|
    to the relative momentum k = (m2 p1 - m1 p2) / M; the plane-wave phase
    splits exactly as p1.r1 + p2.r2 = P.Rw_vec + k.rho_vec.
    """

    rw: float
    rho: float
    gamma: float


def reduced_coordinates(r1, r2, kin: PairKinematics) -> ReducedCoordinates:
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    rw_vec = (kin.m1 * r1 + kin.m2 * r2) / kin.M
    rho_vec = r1 - r2
    n1 = float(np.linalg.norm(r1))
    n2 = float(np.linalg.norm(r2))
    if n1 == 0.0 or n2 == 0.0:
        gamma = 0.0
    else:
        gamma = _vector_angle(r1 / n1, r2 / n2)
    return ReducedCoordinates(rw=float(np.linalg.norm(rw_vec)),
                              rho=float(np.linalg.norm(rho_vec)),
                              gamma=gamma)


def reduced_from_scalars(r1, r2, gamma, kin: PairKinematics):
    """(rw, rho) from radii and opening angle via the law of cosines; vectorized."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    cg = np.cos(np.asarray(gamma, dtype=float))
    rho = np.sqrt(np.maximum(r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * cg, 0.0))
    rw2 = (kin.m1 ** 2 * r1 * r1 + kin.m2 ** 2 * r2 * r2
           + 2.0 * kin.m1 * kin.m2 * r1 * r2 * cg) / kin.M ** 2
    return np.sqrt(np.maximum(rw2, 0.0)), rho


@dataclass(frozen=True)
class AlignmentAngles:
    """Angles between each fragment's momentum and its position direction."""

    xi1: float
    xi2: float

    @classmethod
    def from_directions(cls, p1_dir: SphericalDirection, r1_dir: SphericalDirection,
                        p2_dir: SphericalDirection, r2_dir: SphericalDirection):
        return cls(xi1=opening_angle(p1_dir, r1_dir),
                   xi2=opening_angle(p2_dir, r2_dir))

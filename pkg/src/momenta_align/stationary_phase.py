"""Closed-form predictions from the stationary points of the pair phase.

These are the analytic expectations the full quadrature and the sampled
statistics are tested against: fragments appear on shells r_j = v_j t, in
back-to-back directions, with momentum magnitude p0 = sqrt(2 mu E0). The
deviation budget collects the two order-of-magnitude misalignment scales,
the angular diffraction limit sqrt(h / (p r)) = sqrt(lambda / r) and the
momentum-balance spread deltaP0 / p0, together with the radius where they
cross. All formulas use h = 2 pi (hbar = 1) with no fitted prefactors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .model import H, PairKinematics, SourceSpectrum


@dataclass(frozen=True)
class StationaryPrediction:
    """Where the detection density peaks according to the phase conditions."""

    xi1: float
    xi2: float
    r1_peak: float
    r2_peak: float
    gamma_peak: float
    p1_mag: float
    p2_mag: float


def predict(kin: PairKinematics, t: float) -> StationaryPrediction:
    """Peak positions at time t; t <= 0 (the incoming branch) is rejected."""
    if not (t > 0.0):
        raise DomainError(f"t must be positive, got {t!r}")
    return StationaryPrediction(
        xi1=0.0, xi2=0.0,
        r1_peak=kin.v1 * t, r2_peak=kin.v2 * t,
        gamma_peak=math.pi,
        p1_mag=kin.p0, p2_mag=kin.p0)


@dataclass(frozen=True)
class DeviationBudget:
    """The two misalignment scales at radius r and which one dominates there."""

    diffraction_angle: float
    momentum_angle: float
    crossover_radius: float
    dominant: str


def deviation_budget(kin: PairKinematics, spectrum: SourceSpectrum,
                     r: float) -> DeviationBudget:
    if not (r > 0.0):
        raise DomainError(f"r must be positive, got {r!r}")
    diffraction = math.sqrt(H / (kin.p0 * r))
    momentum = spectrum.delta_p0 / kin.p0
    crossover = H * kin.p0 / spectrum.delta_p0 ** 2
    dominant = "diffraction" if diffraction > momentum else "momentum"
    return DeviationBudget(diffraction_angle=diffraction, momentum_angle=momentum,
                           crossover_radius=crossover, dominant=dominant)


def sql_width(m: float, t: float) -> float:
    """Standard quantum limit sqrt(h t / m): the spread a free mass accumulates.

    An order-of-magnitude scale, not a fitted width.
    """
    if not (m > 0.0):
        raise DomainError(f"m must be positive, got {m!r}")
    if not (t > 0.0):
        raise DomainError(f"t must be positive, got {t!r}")
    return math.sqrt(H * t / m)

"""Correlated two-fragment amplitude on expanding shells.

Everything here evaluates

    psi(r1, r2, t) = (4 pi)^2 int dP dk F(P, E) j0(P Rw) j0(k rho)
                     exp(-i E t) P^2 k^2,        E = P^2/(2M) + k^2/(2 mu),

which depends on the detection points only through the reduced scalars
(Rw, rho). Single points go through the self-checking quadrature in
`quadrature`; grids and tables share one oscillation-resolving grid shaped by
the largest (Rw, rho) in the batch, assembled with matrix contractions so
angular tables and radial profiles stay cheap.

For event sampling and norm integrals, |psi|^2 is tabulated on an (Rw, rho)
rectangle restricted to the state's support (a center-of-mass blob of width
sigma_cm(t) times a shell of thickness sigma_shell(t) around the relative
radius) and read back by bilinear interpolation; the clipped table edges are
verified to be negligible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DomainError, ResourceError
from .model import (PairKinematics, SourceSpectrum, reduced_coordinates,
                    reduced_from_scalars)
from .quadrature import (QuadratureResult, QuadratureSpec, axis_point_count,
                         integrate_reduced_2d, spectrum_windows, spherical_sinc,
                         _trapezoid_weights)

FOUR_PI_SQ = (4.0 * math.pi) ** 2
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class PairAmplitudeField:
    """Amplitude evaluator bound to one spectrum, kinematics and grid policy."""

    spectrum: SourceSpectrum
    kin: PairKinematics
    quad: QuadratureSpec = QuadratureSpec()


def cm_width(field: PairAmplitudeField, t: float) -> float:
    """Per-component spatial width of the center-of-mass packet at time t."""
    w = field.spectrum.delta_p0
    M = field.kin.M
    return math.sqrt((1.0 + (t * w * w / M) ** 2) / (2.0 * w * w))


def relative_momentum_width(field: PairAmplitudeField) -> float:
    """Width of the relative-momentum magnitude implied by the energy width."""
    return field.kin.mu * field.spectrum.delta_e / field.kin.p0


def shell_width(field: PairAmplitudeField, t: float) -> float:
    """Radial thickness of the expanding relative-coordinate shell at time t."""
    sk = relative_momentum_width(field)
    mu = field.kin.mu
    return math.sqrt((1.0 + (t * sk * sk / mu) ** 2) / (2.0 * sk * sk))


def shell_radius(field: PairAmplitudeField, t: float) -> float:
    return field.kin.relative_speed * t


def _phase_rates(field, rw_max, rho_max, t):
    (_, p_hi), (_, k_hi) = spectrum_windows(field.spectrum, field.kin, field.quad)
    return (abs(rw_max) + p_hi * t / field.kin.M,
            abs(rho_max) + k_hi * t / field.kin.mu)


def _integrand(field, rw, rho, t):
    sp, kin = field.spectrum, field.kin

    def f(p, k):
        energy = p * p / (2.0 * kin.M) + k * k / (2.0 * kin.mu)
        envelope = sp.amplitude * np.exp(-p * p / (2.0 * sp.delta_p0 ** 2)) \
            * np.exp(-(energy - sp.E0) ** 2 / (2.0 * sp.delta_e ** 2))
        return (FOUR_PI_SQ * envelope * spherical_sinc(p * rw)
                * spherical_sinc(k * rho) * np.exp(-1j * energy * t)
                * p * p * k * k)

    return f


def evaluate_reduced(field: PairAmplitudeField, rw: float, rho: float,
                     t: float) -> QuadratureResult:
    """Self-checking quadrature of the amplitude at reduced scalars (rw, rho)."""
    windows = spectrum_windows(field.spectrum, field.kin, field.quad)
    rates = _phase_rates(field, rw, rho, t)
    sigmas = (field.spectrum.delta_p0, relative_momentum_width(field))
    return integrate_reduced_2d(_integrand(field, rw, rho, t), windows, rates,
                                field.quad, envelope_sigmas=sigmas)


def evaluate_amplitude(field: PairAmplitudeField, r1, r2, t: float) -> complex:
    """psi(r1, r2, t) for 3-vector detection points; t must be positive.

    Negative and zero times correspond to the incoming branch of the motion
    and are rejected.
    """
    if not (t > 0.0):
        raise DomainError(f"t must be positive, got {t!r}")
    red = reduced_coordinates(r1, r2, field.kin)
    return evaluate_reduced(field, red.rw, red.rho, t).value


def _shared_grids(field, rw_max, rho_max, t):
    # the factorized assembly evaluates O(n_p + n_k) grid nodes, never the
    # product, so that is what the budget applies to here
    windows = spectrum_windows(field.spectrum, field.kin, field.quad)
    (p_lo, p_hi), (k_lo, k_hi) = windows
    rate_p, rate_k = _phase_rates(field, rw_max, rho_max, t)
    n_p = axis_point_count(p_hi - p_lo, rate_p, field.quad, field.spectrum.delta_p0)
    n_k = axis_point_count(k_hi - k_lo, rate_k, field.quad,
                           relative_momentum_width(field))
    if n_p + n_k > field.quad.max_grid_points:
        raise ResourceError(
            f"batch grid needs {n_p + n_k} axis points, "
            f"limit is {field.quad.max_grid_points}",
            required=n_p + n_k, limit=field.quad.max_grid_points)
    return np.linspace(p_lo, p_hi, n_p), np.linspace(k_lo, k_hi, n_k)


def _column_factors(field, p_grid, k_grid, t):
    sp, kin = field.spectrum, field.kin
    wp = _trapezoid_weights(p_grid)
    wk = _trapezoid_weights(k_grid)
    col_p = (wp * sp.amplitude * FOUR_PI_SQ * p_grid * p_grid
             * np.exp(-p_grid * p_grid / (2.0 * sp.delta_p0 ** 2))
             * np.exp(-1j * p_grid * p_grid * t / (2.0 * kin.M)))
    col_k = (wk * k_grid * k_grid
             * np.exp(-1j * k_grid * k_grid * t / (2.0 * kin.mu)))
    return col_p, col_k


# the batched assemblers factorize the energy Gaussian through a discretized
# Fourier representation,
#     exp(-u^2 / (2 dE^2)) = sum_j w_j exp(i omega_j u) + aliasing,
# which splits exp(-(E - E0)^2/(2 dE^2)) into separate P and k factors and
# makes tables linear (instead of cubic) in the grid sizes. With node spacing
# pi/(4 U) the nearest alias sits 7 U away from the represented u range
# [-U, U], and nodes are carried until their Gaussian weight is below 1e-10,
# so the reconstruction error is negligible against rel_tolerance.
_FOURIER_OVERSAMPLING = 4.0
_FOURIER_TAIL = 6.8  # exp(-x^2/2) < 1e-10 beyond this


def _fourier_coupling(field, windows):
    (p_lo, p_hi), (k_lo, k_hi) = windows
    sp, kin = field.spectrum, field.kin
    e_min = k_lo ** 2 / (2.0 * kin.mu)
    e_max = p_hi ** 2 / (2.0 * kin.M) + k_hi ** 2 / (2.0 * kin.mu)
    span = max(sp.E0 - e_min, e_max - sp.E0, 4.0 * sp.delta_e)
    d_omega = math.pi / (_FOURIER_OVERSAMPLING * span)
    j_max = int(math.ceil(_FOURIER_TAIL / sp.delta_e / d_omega))
    omega = d_omega * np.arange(-j_max, j_max + 1)
    weights = (d_omega * sp.delta_e / math.sqrt(2.0 * math.pi)
               * np.exp(-(sp.delta_e * omega) ** 2 / 2.0)
               * np.exp(-1j * omega * sp.E0))
    return omega, weights


def _bessel_moments(values, grid, col, phase_arg, omega):
    """sum_a j0(values_i * grid_a) col_a exp(i omega_w phase_arg_a), chunked."""
    out = np.zeros((values.size, omega.size), dtype=complex)
    chunk = max(16, _CHUNK_ELEMENTS // max(values.size, omega.size))
    for a0 in range(0, grid.size, chunk):
        sl = slice(a0, a0 + chunk)
        left = spherical_sinc(np.outer(values, grid[sl])) * col[None, sl]
        out += left @ np.exp(1j * np.outer(phase_arg[sl], omega))
    return out


def _assemble(field, rw, rho, t, pairs):
    p_grid, k_grid = _shared_grids(field, float(rw.max()), float(rho.max()), t)
    col_p, col_k = _column_factors(field, p_grid, k_grid, t)
    omega, weights = _fourier_coupling(
        field, spectrum_windows(field.spectrum, field.kin, field.quad))
    x = p_grid ** 2 / (2.0 * field.kin.M)
    y = k_grid ** 2 / (2.0 * field.kin.mu)
    a = _bessel_moments(rw, p_grid, col_p, x, omega)
    b = _bessel_moments(rho, k_grid, col_k, y, omega)
    if pairs:
        return np.einsum("nw,w,nw->n", a, weights, b)
    return (a * weights[None, :]) @ b.T


def amplitude_on_pairs(field: PairAmplitudeField, rw, rho, t: float) -> np.ndarray:
    """psi at paired reduced scalars (rw[i], rho[i]) on one shared grid."""
    return _assemble(field, np.asarray(rw, dtype=float),
                     np.asarray(rho, dtype=float), t, pairs=True)


def psi_squared_table(field: PairAmplitudeField, rw_grid, rho_grid,
                      t: float) -> np.ndarray:
    """|psi|^2 on the product grid rw_grid x rho_grid (one shared p/k grid)."""
    psi = _assemble(field, np.asarray(rw_grid, dtype=float),
                    np.asarray(rho_grid, dtype=float), t, pairs=False)
    return np.abs(psi) ** 2


class ReducedDensityTable:
    """Bilinear lookup of |psi|^2 over its support in the (rw, rho) plane.

    Lookups outside the tabulated rectangle return zero; the constructor is
    responsible for checking that the clipped edges really are negligible.
    """

    def __init__(self, rw_grid, rho_grid, values):
        self.rw_grid = rw_grid
        self.rho_grid = rho_grid
        self.values = values

    def __call__(self, rw, rho):
        rw = np.asarray(rw, dtype=float)
        rho = np.asarray(rho, dtype=float)
        rwg, rhog = self.rw_grid, self.rho_grid
        i = np.clip(np.searchsorted(rwg, rw) - 1, 0, rwg.size - 2)
        j = np.clip(np.searchsorted(rhog, rho) - 1, 0, rhog.size - 2)
        tx = np.clip((rw - rwg[i]) / (rwg[1] - rwg[0]), 0.0, 1.0)
        ty = np.clip((rho - rhog[j]) / (rhog[1] - rhog[0]), 0.0, 1.0)
        v = (self.values[i, j] * (1 - tx) * (1 - ty)
             + self.values[i + 1, j] * tx * (1 - ty)
             + self.values[i, j + 1] * (1 - tx) * ty
             + self.values[i + 1, j + 1] * tx * ty)
        inside = ((rw >= rwg[0]) & (rw <= rwg[-1])
                  & (rho >= rhog[0]) & (rho <= rhog[-1]))
        return np.where(inside, v, 0.0)


def build_density_table(field: PairAmplitudeField, t: float,
                        rw_max: float, rho_lo: float, rho_hi: float,
                        edge_tolerance: float = 1e-9) -> ReducedDensityTable:
    """Tabulate |psi|^2 over the requested (rw, rho) ranges clipped to support.

    The rw range is capped where the center-of-mass blob has decayed and the
    rho range where the shell has; caps are widened and the table rebuilt if
    the density at a clipped edge is not negligible relative to the peak.
    """
    sigma_c = cm_width(field, t)
    sigma_s = shell_width(field, t)
    radius = shell_radius(field, t)
    sk = relative_momentum_width(field)
    (_, _), (_, k_hi) = spectrum_windows(field.spectrum, field.kin, field.quad)
    # at small times the pre-expansion branch still interferes and |psi|^2
    # ripples in rho on the scale pi/k; resolve it only when it is visible
    incoming_visible = sk * radius < 10.0
    cap_sigmas = 14.0
    for _ in range(4):
        rw_hi = min(rw_max, cap_sigmas * sigma_c)
        lo = 0.0 if incoming_visible else max(0.0, radius - cap_sigmas * sigma_s)
        r_lo = max(rho_lo, lo)
        r_hi = min(rho_hi, radius + cap_sigmas * sigma_s)
        d_rw = sigma_c / 16.0
        d_rho = sigma_s / 16.0
        if incoming_visible:
            d_rho = min(d_rho, math.pi / (6.0 * k_hi))
        n_rw = int(np.clip(math.ceil(rw_hi / d_rw) + 1, 33, 6000))
        n_rho = int(np.clip(math.ceil((r_hi - r_lo) / d_rho) + 1, 33, 9000))
        rw_grid = np.linspace(0.0, rw_hi, n_rw)
        rho_grid = np.linspace(r_lo, r_hi, n_rho)
        values = psi_squared_table(field, rw_grid, rho_grid, t)
        peak = values.max()
        if peak == 0.0:
            return ReducedDensityTable(rw_grid, rho_grid, values)
        bad = False
        if rw_hi < rw_max and values[-1, :].max() > edge_tolerance * peak:
            bad = True
        if r_lo > rho_lo and values[:, 0].max() > edge_tolerance * peak:
            bad = True
        if r_hi < rho_hi and values[:, -1].max() > edge_tolerance * peak:
            bad = True
        if not bad:
            _probe_table(field, t, rw_grid, rho_grid, values)
            return ReducedDensityTable(rw_grid, rho_grid, values)
        cap_sigmas *= 1.6
    raise CoverageError("density support keeps exceeding the tabulated window")


_PROBE_GRID_BUDGET = 40_000_000


def _probe_table(field, t, rw_grid, rho_grid, values):
    """Check the factorized table against the direct quadrature at its peak.

    The direct path evaluates the 2-D integrand without the Fourier-separated
    coupling, so this guards the whole batched assembly. Skipped when the
    direct grid would be unreasonably large.
    """
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    probe_spec = QuadratureSpec(
        points_per_oscillation=field.quad.points_per_oscillation,
        truncation_sigmas=field.quad.truncation_sigmas,
        max_grid_points=min(field.quad.max_grid_points, _PROBE_GRID_BUDGET),
        rel_tolerance=field.quad.rel_tolerance)
    probe_field = PairAmplitudeField(spectrum=field.spectrum, kin=field.kin,
                                     quad=probe_spec)
    try:
        direct = evaluate_reduced(probe_field, float(rw_grid[i]),
                                  float(rho_grid[j]), t)
    except ResourceError:
        return
    expected = abs(direct.value) ** 2
    if abs(values[i, j] - expected) > 0.03 * values.max() + 1e-30:
        raise RuntimeError(
            "tabulated density disagrees with the direct quadrature "
            f"({values[i, j]:.6e} vs {expected:.6e} at the peak)")


def radial_box(field: PairAmplitudeField, t: float):
    """Per-fragment radial windows covering the shells at time t."""
    ns = field.quad.truncation_sigmas
    half = ns * math.sqrt(cm_width(field, t) ** 2 + (shell_width(field, t) / 2.0) ** 2)
    boxes = []
    for v in (field.kin.v1, field.kin.v2):
        center = v * t
        boxes.append((max(0.0, center - half), center + half))
    return tuple(boxes)


@dataclass(frozen=True)
class GammaDensityTable:
    """Normalized opening-angle density at fixed radii and time.

    density includes the sin(gamma) solid-angle factor and integrates to one
    over the grid; shape is |psi|^2 itself (the density with sin(gamma)
    removed), whose mode is what the anti-alignment statements refer to.
    """

    r1: float
    r2: float
    t: float
    gamma: np.ndarray
    density: np.ndarray
    shape: np.ndarray
    normalization: float
    mode_gamma: float
    mode_gamma_shape: float

    def width_about_pi(self) -> float:
        """RMS of (pi - gamma) under the tabulated density."""
        eps = math.pi - self.gamma
        return math.sqrt(_trapz(self.density * eps * eps, self.gamma))


def _trapz(y, x):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def gamma_density(field: PairAmplitudeField, r1: float, r2: float, t: float,
                  gamma_grid=512) -> GammaDensityTable:
    """Tabulate the joint-direction density against the opening angle.

    gamma_grid may be a cell count (uniform grid on [0, pi]) or an explicit
    strictly increasing array of nodes in [0, pi].
    """
    if not (t > 0.0):
        raise DomainError(f"t must be positive, got {t!r}")
    if not (r1 > 0.0 and r2 > 0.0):
        raise DomainError("radii must be positive")
    if np.isscalar(gamma_grid):
        gamma = np.linspace(0.0, math.pi, int(gamma_grid) + 1)
    else:
        gamma = np.asarray(gamma_grid, dtype=float)
        if gamma.ndim != 1 or gamma.size < 2 or np.any(np.diff(gamma) <= 0.0):
            raise DomainError("gamma grid must be strictly increasing")
        if gamma[0] < 0.0 or gamma[-1] > math.pi:
            raise DomainError("gamma grid must lie within [0, pi]")
    rw, rho = reduced_from_scalars(r1, r2, gamma, field.kin)
    shape = np.abs(amplitude_on_pairs(field, rw, rho, t)) ** 2
    raw = shape * np.sin(gamma)
    norm = _trapz(raw, gamma)
    if norm <= 0.0:
        raise DomainError("the angular density vanishes on this grid")
    density = raw / norm
    return GammaDensityTable(
        r1=r1, r2=r2, t=t, gamma=gamma, density=density, shape=shape,
        normalization=norm,
        mode_gamma=float(gamma[int(np.argmax(density))]),
        mode_gamma_shape=float(gamma[int(np.argmax(shape))]))


@dataclass(frozen=True)
class RadialProfile:
    """|psi|^2 r^4 along the anti-aligned diagonal r1 = r2 = r."""

    t: float
    r: np.ndarray
    density: np.ndarray
    peak_r: float


def _refine_peak(x, y):
    i = int(np.argmax(y))
    if 0 < i < x.size - 1:
        d = (y[i - 1] - 2.0 * y[i] + y[i + 1])
        if d < 0.0:
            return float(x[i] + 0.5 * (y[i - 1] - y[i + 1]) / d * (x[1] - x[0]))
    return float(x[i])


def radial_profile(field: PairAmplitudeField, t: float, r_grid=None,
                   n_points: int = 257) -> RadialProfile:
    """Radial detection density for back-to-back directions, r1 = r2 = r."""
    if not (t > 0.0):
        raise DomainError(f"t must be positive, got {t!r}")
    kin = field.kin
    if r_grid is None:
        center = 0.5 * kin.relative_speed * t
        half = field.quad.truncation_sigmas * 0.5 * (shell_width(field, t)
                                                     + cm_width(field, t))
        r_grid = np.linspace(max(1e-9, center - half), center + half, n_points)
    else:
        r_grid = np.asarray(r_grid, dtype=float)
    rw = r_grid * abs(kin.m1 - kin.m2) / kin.M
    rho = 2.0 * r_grid
    psi = amplitude_on_pairs(field, rw, rho, t)
    density = np.abs(psi) ** 2 * r_grid ** 4
    return RadialProfile(t=t, r=r_grid, density=density,
                         peak_r=_refine_peak(r_grid, density))


def norm_on_shells(field: PairAmplitudeField, t: float, n_radial: int = 96,
                   n_gamma: int = 512, box=None) -> float:
    """8 pi^2 * triple integral of |psi|^2 r1^2 r2^2 sin(gamma) over the box.

    The box must cover at least truncationSigmas combined shell widths around
    each fragment radius v_j t; the default box does.
    """
    if not (t > 0.0):
        raise DomainError(f"t must be positive, got {t!r}")
    auto = radial_box(field, t)
    if box is None:
        box = auto
    else:
        for given, need, name in zip(box, auto, ("r1", "r2")):
            if given[0] > need[0] + 1e-9 or given[1] < need[1] - 1e-9:
                raise CoverageError(
                    f"{name} box {given} does not cover the required window {need}")
    r1 = np.linspace(box[0][0], box[0][1], n_radial)
    r2 = np.linspace(box[1][0], box[1][1], n_radial)
    gamma = np.linspace(0.0, math.pi, n_gamma + 1)
    rw_max = (field.kin.m1 * r1[-1] + field.kin.m2 * r2[-1]) / field.kin.M
    rho_lo = max(0.0, r1[0] - r2[-1], r2[0] - r1[-1])
    rho_hi = r1[-1] + r2[-1]
    table = build_density_table(field, t, rw_max, rho_lo, rho_hi)

    w1 = _trapezoid_weights(r1) * r1 * r1
    w2 = _trapezoid_weights(r2) * r2 * r2
    wg = _trapezoid_weights(gamma) * np.sin(gamma)
    total = 0.0
    chunk = max(1, _CHUNK_ELEMENTS // (n_radial * n_radial))
    for g0 in range(0, gamma.size, chunk):
        gc = gamma[g0:g0 + chunk]
        rw, rho = reduced_from_scalars(r1[:, None, None], r2[None, :, None],
                                       gc[None, None, :], field.kin)
        vals = table(rw, rho)
        total += float(np.einsum("i,j,g,ijg->", w1, w2, wg[g0:g0 + chunk], vals))
    return 8.0 * math.pi ** 2 * total


def normalized_amplitude(field: PairAmplitudeField, t_ref: float,
                         **norm_kwargs) -> PairAmplitudeField:
    """Rescale the spectrum so norm_on_shells equals one at the reference time."""
    norm = norm_on_shells(field, t_ref, **norm_kwargs)
    if norm <= 0.0:
        raise DomainError("cannot normalize a vanishing state")
    spectrum = SourceSpectrum(
        delta_p0=field.spectrum.delta_p0, E0=field.spectrum.E0,
        delta_e=field.spectrum.delta_e,
        amplitude=field.spectrum.amplitude / math.sqrt(norm))
    return PairAmplitudeField(spectrum=spectrum, kin=field.kin, quad=field.quad)


def uncertainty_product(field: PairAmplitudeField, events) -> float:
    """Delta(p1+p2)_x * Delta(q1+q2)_x from sampled coincidences.

    The momentum spread is the spectrum's per-component width deltaP0; the
    position spread is the sample standard deviation of (r1 + r2)_x.
    """
    if len(events) < 10_000:
        raise DomainError("need at least 10^4 events for the uncertainty product")
    x_sum = (events.r1 * np.sin(events.theta1) * np.cos(events.phi1)
             + events.r2 * np.sin(events.theta2) * np.cos(events.phi2))
    return field.spectrum.delta_p0 * float(np.std(x_sum, ddof=1))

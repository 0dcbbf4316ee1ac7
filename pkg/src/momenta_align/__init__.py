"""Two-fragment decay simulator: expanding spherical-shell wavepackets,
angular anti-alignment of coincident detections, and the scaling of the
deviations from perfect alignment."""

from .errors import ConfigError, CoverageError, DomainError, ResourceError
from .model import (HBAR, H, AlignmentAngles, PairKinematics, ReducedCoordinates,
                    SourceSpectrum, SphericalDirection, UnitsConvention,
                    cos_between, default_spectrum, make_kinematics, opening_angle,
                    reduced_coordinates, reduced_from_scalars)
from .quadrature import (MCOracleSpec, MCResult, QuadratureResult, QuadratureSpec,
                         integrate_reduced_2d, mc_oracle_6d, philox_rng,
                         spectrum_windows, spherical_sinc)
from .single_particle import (GaussianPacket1D, default_grid, gaussian_closed_form,
                              propagate_numeric, sigma_at, track_centroid_width)
from .pair_amplitude import (GammaDensityTable, PairAmplitudeField, RadialProfile,
                             cm_width, evaluate_amplitude, evaluate_reduced,
                             gamma_density, norm_on_shells, normalized_amplitude,
                             radial_box, radial_profile, shell_radius, shell_width,
                             uncertainty_product)
from .stationary_phase import (DeviationBudget, StationaryPrediction,
                               deviation_budget, predict, sql_width)
from .correlation_stats import (AlignmentReport, CrossoverScan, DetectionEvent,
                                EventSet, ScalingFit, ScanPoint, alignment_report,
                                crossover_scan, fit_scaling, run_deltap0_scan,
                                run_radius_scan, sample_events)

__version__ = "0.1.0"

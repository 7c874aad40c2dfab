"""Two-species interaction system with self-repulsion and cross-attraction, in quantile form."""
from .dynamics import VelocityPair, euler_step, velocity_min_norm, velocity_signsum
from .energy import (EnergyReport, cross_energy, dissipation, energy_from_cdfs, self_energy,
                     total_energy)
from .errors import (CFLError, ConeViolationError, ConfigError, ConvergenceError, DimensionError,
                     DomainError, InvalidMeasureError, TwoSpeciesError)
from .hyperbolic import CdfPair, compare_cdf, run_hyperbolic, upwind_step
from .oracles import (OracleSpec, exact_energy_two_deltas, exact_state, exact_subdifferential)
from .quantile import (DensityProfile, QuantileGrid, StatePair, cdf_from_quantiles, lm_norm,
                       moment2, project_isotonic, quantiles_from_density, reconstruct_density,
                       wasserstein2)
from .scheme import ProxConfig, RunResult, TimeSeriesRecord, evi_residual, prox_step, run

__version__ = "0.1.0"

"""Low-rank completion of partially observed multivariate time series."""

from .als import AlsConfig, DegenerateDesignError, als_fit
from .core import (FactorModel, GroundTruth, ObservationSet, StructureKind, StructureMatrix,
                   empirical_risk, pi_mse, reconstruct)
from .selection import (RankSelectionTrace, fit_rank_path, select_rank_penalized,
                        slope_heuristic)
from .sim import GaussianNoise, SampleMode, SimulationSpec, UniformNoise, simulate
from .structure import (build_identity, build_periodic, build_structure, build_trigonometric,
                        fold_observations)

__version__ = "0.1.0"

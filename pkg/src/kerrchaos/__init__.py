"""kerrchaos: Kerr-coupled field-mode dynamics and ergodicity analysis.

Simulates the mean photon number of a single field mode coupled to a
Kerr-nonlinear oscillator by sector-blocked exact diagonalization, and
analyzes the resulting signal with the standard nonlinear time-series
chain: power spectrum, delay embedding, maximal Lyapunov exponent, and
recurrence-time statistics.
"""

__version__ = "0.1.0"

from .evolve import ObservableSet, TimeSeries, conservation_residual, evolve_series
from .model import ModelParams, SectorBlock, build_sector_block, sector_dimension
from .states import (
    QuantumState,
    StateSpec,
    build_state,
    coherent_state,
    laguerre,
    mean_photon_initial,
    pacs_state,
)

__all__ = [
    "ModelParams",
    "SectorBlock",
    "build_sector_block",
    "sector_dimension",
    "QuantumState",
    "StateSpec",
    "build_state",
    "coherent_state",
    "pacs_state",
    "laguerre",
    "mean_photon_initial",
    "TimeSeries",
    "ObservableSet",
    "evolve_series",
    "conservation_residual",
    "__version__",
]

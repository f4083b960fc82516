"""Hill-relation estimators for Langevin transitions between metastable sets."""
from .errors import (ConfigError, DegenerateAMSError, GeometryError, HillgateError,
                     InfiniteEstimateError, InsufficientDataError, InvalidInputError,
                     NumericalBlowupError, SimulationTimeout, UnsupportedOperationError,
                     UsageError)
from .fields import ForceField, PhasePoint, PotentialSpec, ThermoParams
from .geometry import BoundarySide, LevelSetRegion, MetastablePair

__version__ = "0.1.0"

__all__ = [
    "BoundarySide", "ConfigError", "DegenerateAMSError", "ForceField", "GeometryError",
    "HillgateError", "InfiniteEstimateError", "InsufficientDataError", "InvalidInputError",
    "LevelSetRegion", "MetastablePair", "NumericalBlowupError", "PhasePoint", "PotentialSpec",
    "SimulationTimeout", "ThermoParams", "UnsupportedOperationError", "UsageError",
]

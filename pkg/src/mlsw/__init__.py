"""Multilayer shallow-water solver with rigid-lid and acoustic limits."""
from .core import Grid, Params, StateU, StateV, derive_params
from .errors import (ComplexPairDetected, ConfigError, DegenerateGap, DepthLoss,
                     HyperbolicityLoss, MLSWError, NumericalFailure, SnapshotFormatError)

__version__ = "0.1.0"

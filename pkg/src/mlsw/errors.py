"""Exception hierarchy; CLI exit codes hang off these classes."""


class MLSWError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(MLSWError, ValueError):
    """Invalid parameters or configuration text."""

    exit_code = 2


class HyperbolicityLoss(MLSWError):
    """The symbol stopped being diagonalizable with real spectrum."""

    exit_code = 3


class ComplexPairDetected(HyperbolicityLoss):
    def __init__(self, message, index=None, shear=None, imag=None):
        super().__init__(message)
        self.index = index
        self.shear = shear
        self.imag = imag


class DegenerateGap(HyperbolicityLoss):
    def __init__(self, message, index=None, gap=None):
        super().__init__(message)
        self.index = index
        self.gap = gap


class NumericalFailure(MLSWError):
    exit_code = 4


class DepthLoss(NumericalFailure, ValueError):
    """A layer depth fell below the admissible floor."""

    def __init__(self, message, layer=None, value=None):
        super().__init__(message)
        self.layer = layer
        self.value = value


class SnapshotFormatError(MLSWError, ValueError):
    exit_code = 4

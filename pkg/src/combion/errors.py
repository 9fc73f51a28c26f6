"""Exception types raised by the simulator."""


class CombionError(Exception):
    """Base class for all simulator errors."""


class NotOnResonance(CombionError):
    """The comb spacing does not bridge the qubit splitting (q is not an integer)."""


class CutoffTooSmall(CombionError):
    """Population reached the top of the truncated Fock basis."""

    def __init__(self, message, leakage=None):
        super().__init__(message)
        self.leakage = leakage


class InvalidRatio(CombionError, ValueError):
    """Red/blue sideband strengths cannot be turned into a temperature."""


class InsufficientScan(CombionError, ValueError):
    """A parity scan does not cover a full period of cos(2 phi)."""


class SchemaError(CombionError, ValueError):
    """A configuration failed validation; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))

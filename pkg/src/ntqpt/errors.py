"""Exception hierarchy shared by the library and the CLI."""


class NtqptError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(NtqptError, ValueError):
    """Inconsistent model specification or run configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PhaseError(NtqptError):
    """The requested coupling has no symmetry-broken ground state."""


class TruncationError(NtqptError):
    """Photon truncation of the Dicke model is too small."""

    def __init__(self, message, tail_weight):
        super().__init__(f"{message} (tail weight {tail_weight:.3e})")
        self.tail_weight = tail_weight


class DiagonalizationError(NtqptError):
    """LAPACK failed or returned an inaccurate decomposition."""


class DetectorError(NtqptError):
    """A finite-size precursor detector found no critical signature."""


class TargetingError(NtqptError):
    """A target quench energy cannot be reached from the ordered branch."""

    def __init__(self, message, attainable):
        lo, hi = attainable
        super().__init__(f"{message}; attainable excitation energies [{lo:.6g}, {hi:.6g}]")
        self.attainable = attainable


class FitError(NtqptError, ValueError):
    """Power-law fit received unusable data."""

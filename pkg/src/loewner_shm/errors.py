"""Exception types raised across the package."""


class LoewnerShmError(Exception):
    """Base class for all package errors."""


class DimensionError(LoewnerShmError, ValueError):
    """Array shapes, lengths or sample rates do not agree."""


class IllConditionedDivisionError(LoewnerShmError, ValueError):
    """An input spectrum is too small at a retained bin to divide by."""

    def __init__(self, bin_index, frequency, magnitude, threshold):
        self.bin_index = int(bin_index)
        self.frequency = float(frequency)
        super().__init__(
            f"input spectrum magnitude {magnitude:.3e} below floor {threshold:.3e} "
            f"at bin {self.bin_index} ({self.frequency:.6g} Hz)"
        )


class EmptyBandError(LoewnerShmError, ValueError):
    """A frequency band selection retained no bins."""


class SingularPencilError(LoewnerShmError, ValueError):
    """``s E - A`` is singular at a requested frequency."""

    def __init__(self, frequency):
        self.frequency = float(frequency)
        super().__init__(f"pencil (sE - A) is singular at f = {self.frequency:.6g} Hz")


class InsufficientDataError(LoewnerShmError, ValueError):
    """Not enough frequency samples to form left and right data."""


class CoincidentPointsError(LoewnerShmError, ValueError):
    """A left and a right interpolation point coincide."""

    def __init__(self, mu, lam):
        self.mu = complex(mu)
        self.lam = complex(lam)
        super().__init__(f"left point mu={self.mu} coincides with right point lambda={self.lam}")


class PencilConsistencyError(LoewnerShmError, ArithmeticError):
    """Sylvester identities of a constructed pencil are violated."""


class RankDeficientOrderError(LoewnerShmError, ValueError):
    """Requested order exceeds the numerical rank of the Loewner pencil."""

    def __init__(self, order, ratio):
        self.order = int(order)
        self.ratio = float(ratio)
        super().__init__(
            f"order {self.order} exceeds numerical rank (sigma_k/sigma_1 = {self.ratio:.3e})"
        )


class DegenerateRealizationError(LoewnerShmError, ArithmeticError):
    """The descriptor matrix E is singular at working precision."""


class AliasingError(LoewnerShmError, ValueError):
    """Sampling rate does not resolve the highest system frequency."""


class UndefinedMacError(LoewnerShmError, ValueError):
    """MAC requested for a zero vector."""


class UndefinedIndexError(LoewnerShmError, ValueError):
    """A damage index was requested over an empty mode pairing."""


class DegenerateNormalizationError(LoewnerShmError, ValueError):
    """Min-max normalization of a constant vector."""


class FormatError(LoewnerShmError, ValueError):
    """A container file is malformed or carries unsupported values."""


class ConfigError(LoewnerShmError, ValueError):
    """Run configuration is invalid."""


class ArtifactError(LoewnerShmError, FileNotFoundError):
    """A pipeline stage could not find an artifact it depends on."""

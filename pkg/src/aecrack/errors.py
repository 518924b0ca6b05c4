"""Exception and warning types raised across the package."""


class AECrackError(ValueError):
    """Base class for all aecrack errors."""


class EmptySignalError(AECrackError):
    """Signal has no samples."""


class SignalTooShortError(AECrackError):
    """Signal is shorter than the operation requires."""


class AllZeroSignalError(AECrackError):
    """Signal is identically zero, so phase-based quantities are undefined."""


class WindowTooLongError(AECrackError):
    """Analysis window exceeds the signal length."""


class ZeroHopError(AECrackError):
    """Frame hop must be at least one sample."""


class ModelLengthMismatchError(AECrackError):
    """Transducer response grid does not match the transform size."""


class TooFewFramesError(AECrackError):
    """Not enough frames for a stable frame-average statistic."""


class EmptyInputError(AECrackError):
    """Operation received an empty sequence."""


class EmptyDatasetError(AECrackError):
    """Dataset contains no events."""


class DatasetTooSmallError(AECrackError):
    """Dataset is too small to partition as requested."""


class UnlabeledDataError(AECrackError):
    """Operation requires labels but some events carry none."""


class RowNotNormalizedError(AECrackError):
    """Probability rows do not sum to one within tolerance."""


class DimensionMismatchError(AECrackError):
    """Array shapes are inconsistent with the declared layer sizes."""


class ConfigMismatchError(AECrackError):
    """Feature metadata does not match the model metadata."""


class TooFewIMFsWarning(UserWarning):
    """Decomposition yielded fewer than three modes; input passed through."""

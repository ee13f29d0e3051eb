"""Exception types shared across the toolkit."""


class SqdUnwrapError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(SqdUnwrapError, ValueError):
    """Bad arguments: non-finite values, shape mismatches, invalid configs."""


class DegenerateSignalError(InvalidInputError):
    """Signal power is zero, so an SNR-relative quantity is undefined."""


class DatasetError(SqdUnwrapError, RuntimeError):
    """A stored dataset is missing, truncated, or otherwise unreadable."""


class DatasetVersionError(DatasetError):
    """The on-disk dataset format version is not supported."""


class CheckpointError(SqdUnwrapError, RuntimeError):
    """A checkpoint file is unreadable or does not match the model."""


class TrainingDivergedError(SqdUnwrapError, RuntimeError):
    """The training loss became non-finite."""

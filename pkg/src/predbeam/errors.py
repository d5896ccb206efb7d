"""Exception types raised across the package."""


class PredbeamError(Exception):
    """Base class for all package errors."""


class InvalidArgument(PredbeamError, ValueError):
    pass


class DegenerateGeometry(PredbeamError, ValueError):
    """A vehicle sits on the RSU, or a geometric inverse leaves its domain."""


class NotEnoughHistory(PredbeamError, ValueError):
    pass


class ShapeMismatch(PredbeamError, ValueError):
    pass


class TrainingDiverged(PredbeamError, RuntimeError):
    """Non-finite loss or gradient during training.

    ``trace`` carries the loss values recorded up to the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class CheckpointError(PredbeamError, ValueError):
    pass


class CorruptPayload(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class ConfigError(PredbeamError, ValueError):
    pass

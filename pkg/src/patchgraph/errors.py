"""Exception types raised across the pipeline."""


class PatchGraphError(Exception):
    pass


class ShapeError(PatchGraphError, ValueError):
    pass


class ConfigError(PatchGraphError, ValueError):
    pass


class DomainError(PatchGraphError, ValueError):
    pass


class FormatError(PatchGraphError, ValueError):
    pass


class NumericError(PatchGraphError, ArithmeticError):
    pass


class StateError(PatchGraphError, RuntimeError):
    pass


class BoundsError(PatchGraphError, IndexError):
    pass


class DegenerateGraphError(PatchGraphError, ValueError):
    """A graph produced no messages, so the readout has nothing to pool."""


class StageError(PatchGraphError, RuntimeError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")

"""Exception hierarchy shared by all stages."""


class HardyLiftError(Exception):
    """Base class for errors raised by this package."""


class DomainError(HardyLiftError, ValueError):
    """Evaluation requested outside the domain of a series."""


class ParameterError(HardyLiftError, ValueError):
    """An argument is out of its admissible range."""


class DimensionError(HardyLiftError, ValueError):
    """Shapes of the operands do not match."""


class CertificateError(HardyLiftError):
    """A series failed its inner-function certificate."""

    def __init__(self, msg, defect=None):
        super().__init__(msg)
        self.defect = defect


class InvarianceError(HardyLiftError):
    """A projection is not shift invariant within tolerance."""


class LiftError(HardyLiftError):
    """Failure inside the lifting pipeline.

    ``stage`` names the pipeline stage (``"wandering"``, ``"cover"``,
    ``"base"``, ``"extend"``, ``"patch"``); ``t_index`` and ``base`` locate
    the failure when known.
    """

    def __init__(self, msg, stage, t_index=None, base=None):
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage
        self.t_index = t_index
        self.base = base


class SpecError(HardyLiftError, ValueError):
    """An input specification could not be validated."""

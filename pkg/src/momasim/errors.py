"""Exception hierarchy shared by all modules."""


class MomaError(ValueError):
    """Base class for every error raised by momasim."""


class InvalidParameterError(MomaError):
    pass


class InvalidPlanError(MomaError):
    pass


class EmptySetError(MomaError):
    pass


class UnsupportedSizeError(MomaError):
    pass


class InvalidAssignmentError(MomaError):
    pass


class InvalidProfileError(MomaError):
    pass


class InvalidInputError(MomaError):
    pass


class InvalidTargetError(MomaError):
    pass


class ConfigError(MomaError):
    """Malformed or unknown keys in a scenario document."""

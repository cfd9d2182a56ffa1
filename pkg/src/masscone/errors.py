"""Exception hierarchy shared by every masscone module."""


class MassconeError(Exception):
    """Base class for all library errors."""


class ZeroMassError(MassconeError, ValueError):
    pass


class MassMismatchError(MassconeError, ValueError):
    pass


class NotAnIsometryError(MassconeError, ValueError):
    pass


class UnsupportedInstanceError(MassconeError, ValueError):
    pass


class DomainError(MassconeError, ValueError):
    """A support point lies outside the declared bounded domain."""


class InadmissibleScalingError(MassconeError, ValueError):
    """The scaling function fails the Lipschitz/monotone/vanishing checks."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateProbeError(MassconeError, ValueError):
    pass


class UnsupportedExponentError(MassconeError, ValueError):
    pass


class GridTooCoarseError(MassconeError, ValueError):
    pass


class SamplerError(MassconeError, ValueError):
    pass


class FiberViolationError(MassconeError):
    """Candidate metric does not satisfy the fiber condition with the given f."""


class ConfigError(MassconeError, ValueError):
    """Invalid configuration; carries the offending file and field when known."""

    def __init__(self, message, path=None, field=None):
        self.bare_message = message
        where = []
        if path is not None:
            where.append(str(path))
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{': '.join(where)}: {message}"
        super().__init__(message)
        self.path = path
        self.field = field

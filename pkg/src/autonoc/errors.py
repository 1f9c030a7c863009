"""Exception hierarchy shared by all subsystems."""


class AutonocError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(AutonocError):
    """A config value is missing or out of range.  ``field`` is a dotted path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SetupError(AutonocError):
    pass


class UnsupportedChannelError(AutonocError):
    pass


class InvalidImpairmentError(AutonocError):
    pass


class NotFoundError(AutonocError):
    pass


class ConflictError(AutonocError):
    pass


class InputError(AutonocError):
    pass


class AmbiguousClassificationError(AutonocError):
    def __init__(self, candidates):
        super().__init__(f"ambiguous failure evidence: {', '.join(candidates)}")
        self.candidates = tuple(candidates)


class CannotLocalizeError(AutonocError):
    pass


class InfeasibleDemandError(AutonocError):
    def __init__(self, flow: str, gbps: float, capacity: float):
        super().__init__(f"flow {flow} needs {gbps} Gbps > link capacity {capacity} Gbps")
        self.flow = flow


class BlockedError(AutonocError):
    """No (path, wavelength) pair can carry the demand."""


class EncodingError(AutonocError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NotAHandoffError(AutonocError):
    pass


class HandoffParseError(AutonocError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RoutingError(AutonocError):
    pass


class IllegalTransitionError(AutonocError):
    pass


class BackendError(AutonocError):
    pass


class IngestError(AutonocError):
    pass

"""Exception hierarchy. CLI exit codes are keyed off these classes."""


class TripressError(Exception):
    exit_code = 2


class ConfigError(TripressError):
    exit_code = 1


class ParseError(TripressError):
    def __init__(self, message, source="<input>", line_no=0):
        self.source = source
        self.line_no = line_no
        self.reason = message
        super().__init__(f"{source}:{line_no}: {message}")


class CorruptDictionaryError(TripressError):
    pass


class CorruptDataError(TripressError):
    pass


class TransportError(TripressError):
    pass


class ProtocolError(TripressError):
    """Raised when places disagree about ownership or message alignment."""

    exit_code = 3


class ConsistencyError(TripressError):
    exit_code = 3


class CapacityError(TripressError):
    exit_code = 3

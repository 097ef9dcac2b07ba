"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class PrivFairError(Exception):
    exit_code = 1


class ParseError(PrivFairError):
    exit_code = 2


class NetworkError(PrivFairError, ConnectionError):
    exit_code = 3


class ProtocolAbort(PrivFairError):
    exit_code = 4


class IntegrityError(ProtocolAbort):
    """Shares handed to reconstruction are not mutually consistent."""


class PreprocessingExhausted(PrivFairError):
    exit_code = 5


class RangeError(PrivFairError, ValueError):
    exit_code = 2


class ShapeError(PrivFairError, ValueError):
    exit_code = 2

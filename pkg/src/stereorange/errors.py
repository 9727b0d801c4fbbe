"""Exception hierarchy.

Everything raised on purpose derives from ``StereoRangeError``. The CLI maps
``ConfigError`` to exit code 1 and every other subclass to exit code 2.
"""


class StereoRangeError(Exception):
    pass


class ConfigError(StereoRangeError):
    pass


class PreconditionError(StereoRangeError, ValueError):
    pass


# geometry
class PointBehindCamera(StereoRangeError):
    pass


class NonConvergent(StereoRangeError):
    pass


# calibration
class OutOfBounds(StereoRangeError):
    pass


class FlatRegion(StereoRangeError):
    pass


class DegenerateConfiguration(StereoRangeError):
    pass


class InsufficientViews(StereoRangeError):
    pass


class IllConditioned(StereoRangeError):
    pass


class EmptyInput(StereoRangeError):
    pass


# rectification
class ZeroBaseline(StereoRangeError):
    pass


class DimensionMismatch(StereoRangeError):
    pass


# detection
class BackendLoadFailure(StereoRangeError):
    pass


class InferenceFailure(StereoRangeError):
    pass


# ranging
class InvalidFov(StereoRangeError, ValueError):
    pass


class DisparityTooSmall(StereoRangeError):
    pass


# synthsim
class TargetBehindCamera(StereoRangeError):
    pass


# pipeline
class CalibrationMissing(ConfigError):
    pass


class NonPositiveActual(StereoRangeError, ValueError):
    pass


class SourceExhausted(StereoRangeError):
    pass


class FormatError(StereoRangeError):
    def __init__(self, message: str, node: str | None = None, line: int | None = None):
        where = []
        if node is not None:
            where.append(f"node {node!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.node = node
        self.line = line

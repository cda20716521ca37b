"""Exception types raised by trackfold."""


class TrackfoldError(ValueError):
    """Base class for all validation errors raised by the library."""


class ZeroNormError(TrackfoldError):
    pass


class NegativeComponentError(TrackfoldError):
    pass


class EmptyTrackError(TrackfoldError):
    pass


class DimensionMismatchError(TrackfoldError):
    pass


class LengthMismatchError(TrackfoldError):
    pass


class MethodMismatchError(TrackfoldError):
    pass


class DuplicateTrackError(TrackfoldError):
    pass


class MissingPosteriorsError(TrackfoldError):
    pass


class MissingLabelError(TrackfoldError):
    pass


class UnknownTrackError(TrackfoldError, KeyError):
    def __str__(self):
        return ValueError.__str__(self)


class DegenerateLabelsError(TrackfoldError):
    pass


class InvalidConfigError(TrackfoldError):
    pass


class InsufficientTracksError(TrackfoldError):
    pass


class ParseError(TrackfoldError):
    """Malformed input file. ``line`` is 1-based, counting the header."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class FileDimensionMismatchError(ParseError, DimensionMismatchError):
    pass


class DuplicateFrameError(ParseError):
    pass

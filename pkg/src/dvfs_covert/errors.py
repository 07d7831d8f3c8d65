"""Exception hierarchy shared by the simulator, codecs and harness."""


class CovertChannelError(Exception):
    """Base class for every error raised by this package."""


# -- SoC model ---------------------------------------------------------------

class SocError(CovertChannelError):
    pass


class PermissionDenied(SocError):
    pass


class FrequencyOutOfRange(SocError):
    pass


class TimeRegression(SocError):
    pass


class NoSegment(SocError):
    pass


class NotGateable(SocError):
    pass


class Overlap(SocError):
    pass


class SameInstantConflict(SocError):
    pass


class UnmappedAddress(SocError):
    pass


class ScheduleError(SocError):
    """A schedule action failed; ``index`` is its position in the schedule."""

    def __init__(self, index: int, cause: SocError):
        super().__init__(f"action #{index}: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause


# -- decoding ----------------------------------------------------------------

class DecodeError(CovertChannelError):
    pass


class NoStartMarker(DecodeError):
    pass


class TruncatedFrame(DecodeError):
    pass


class BadEndMarker(DecodeError):
    pass


class UnknownFrequency(DecodeError):
    pass


class MalformedAlternation(DecodeError):
    pass


class UnknownCount(DecodeError):
    pass


# -- orchestration / metrics -------------------------------------------------

class ScenarioInvalid(CovertChannelError):
    pass


class ZeroDuration(CovertChannelError):
    pass

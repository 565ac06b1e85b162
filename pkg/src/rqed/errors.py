"""Exception hierarchy shared by all modules."""


class RQEDError(Exception):
    """Base class for every error raised by the package."""


class CutoffExceeded(RQEDError, ValueError):
    pass


class CutoffTooSmall(RQEDError, ValueError):
    """Raised when a coherent expansion leaks too much mass past the cutoff."""


class NotNormalized(RQEDError, ValueError):
    pass


class NotCoherent(RQEDError, ValueError):
    pass


class GridMismatch(RQEDError, ValueError):
    pass


class WeightViolation(RQEDError, ValueError):
    pass


class ZeroRemainder(RQEDError, ValueError):
    """The post-detection one-photon remainder vanishes."""


class Undersampled(RQEDError, ValueError):
    pass


class NoMatchedPair(RQEDError, ValueError):
    pass


class AmbiguousMatch(RQEDError, ValueError):
    pass


class BeatCollision(RQEDError, ValueError):
    """A selected frequency coincides with a beat note that must be avoided."""


class NoSignChange(RQEDError, ValueError):
    pass

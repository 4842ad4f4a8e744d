"""Exception types raised by the toolkit."""


class HolocollapseError(Exception):
    """Base class for all errors raised here."""


class CutLocusAmbiguous(HolocollapseError, ValueError):
    """Two minimal logarithms exist; the caller must pick a branch."""


class SamplerTooCoarse(HolocollapseError, RuntimeError):
    pass


class StepRejected(HolocollapseError, RuntimeError):
    """A chart switch landed outside every chart domain."""


class PathEscapesAtlas(HolocollapseError, RuntimeError):
    pass


class IdentificationAmbiguous(HolocollapseError, RuntimeError):
    pass


class DomainTooSmall(HolocollapseError, ValueError):
    pass


class DisconnectedNet(HolocollapseError, RuntimeError):
    """Shortest-path graph is disconnected.

    For horizontal (Carnot-Caratheodory) nets this means the horizontal step is
    under-resolved; raise the net count or the connectivity radius.
    """


class SizeCapExceeded(HolocollapseError, ValueError):
    pass


class NetMismatch(HolocollapseError, RuntimeError):
    pass


class BoundViolated(HolocollapseError, RuntimeError):
    def __init__(self, message, pair=None, step=None):
        super().__init__(message)
        self.pair = pair
        self.step = step


class NoDecay(HolocollapseError, RuntimeError):
    pass

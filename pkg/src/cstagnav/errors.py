"""Exception hierarchy.

Everything raised on bad data or a bad model derives from ``CstagError`` so the
CLI can map it to the data-error exit code.
"""


class CstagError(Exception):
    """Base class for all package errors."""


# -- raster / file io ---------------------------------------------------------
class MalformedHeader(CstagError):
    pass


class TruncatedData(CstagError):
    pass


class UnsupportedMaxval(CstagError):
    pass


class ParseError(CstagError):
    pass


class InvariantViolation(CstagError):
    """A domain invariant does not hold; the message names the invariant."""


class VersionMismatch(CstagError):
    pass


# -- regions / graph ----------------------------------------------------------
class DimensionMismatch(CstagError):
    pass


class UnknownLabel(CstagError):
    def __init__(self, label):
        super().__init__(f"mask label {label} is not in the category map")
        self.label = label


class EmptyRegion(CstagError):
    pass


class DegenerateAngle(CstagError):
    pass


class MissingCameraEdge(CstagError):
    pass


# -- temporal -----------------------------------------------------------------
class FrameIndexMismatch(CstagError):
    pass


# -- model / training ---------------------------------------------------------
class LayoutMismatch(CstagError):
    pass


class NoCandidates(CstagError):
    pass


class NoGroundNode(CstagError):
    pass


class EmptyTrainingSet(CstagError):
    pass


class DivergenceDetected(CstagError):
    pass


class SingularSystem(CstagError):
    pass


# -- synth / iarc -------------------------------------------------------------
class OverlapUnresolvable(CstagError):
    pass


class NoSafeInterval(CstagError):
    """Every ray is blocked; ``fallback`` holds the widest least-blocked run."""

    def __init__(self, message, fallback=None):
        super().__init__(message)
        self.fallback = fallback


class ShapeMismatch(CstagError):
    pass


class FrameError(CstagError):
    """Wraps an error raised while processing one frame of a sequence."""

    def __init__(self, frame_index, cause):
        super().__init__(f"frame {frame_index}: {type(cause).__name__}: {cause}")
        self.frame_index = frame_index
        self.cause = cause

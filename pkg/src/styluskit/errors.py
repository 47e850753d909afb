"""Exception hierarchy shared by all modules.

Two bases matter for the CLI exit-code contract: ``InputError`` maps to
exit code 2 (malformed or insufficient input), ``DegenerateDataError``
maps to exit code 3 (geometrically or numerically degenerate data).
"""

from __future__ import annotations


class StylusKitError(Exception):
    """Base class for every error raised by this package."""


class InputError(StylusKitError):
    """Malformed or insufficient input data."""


class DegenerateDataError(StylusKitError):
    """Input is well-formed but geometrically/numerically degenerate."""


class FormatError(InputError):
    """A stream violates its declared format (bad header, row, or field)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonMonotonicTime(InputError):
    """Timestamps are not increasing where the format requires it."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInput(InputError):
    """An operation received no usable samples."""


class TooShort(InputError):
    """A signal has too few samples for the requested analysis."""


class ShapeMismatch(InputError):
    """Aggregation inputs do not share one sampling structure."""


class ZeroVector(DegenerateDataError):
    """A direction was requested from a (near-)zero vector."""


class AllOutliers(DegenerateDataError):
    """Density filtering found no cluster large enough to keep."""


class DegenerateRotations(DegenerateDataError):
    """Pose set lacks the rotation diversity needed to observe the tip."""


class DegenerateDirection(DegenerateDataError):
    """A reference direction is (near-)parallel to the tool axis."""


class NoConvergence(DegenerateDataError):
    """Iterative refinement did not converge within its iteration budget."""


class ColinearPoints(DegenerateDataError):
    """Probed points are colinear and span no plane."""


class CoincidentPoints(DegenerateDataError):
    """Probed points are too close together to define directions."""


class DegenerateHeight(DegenerateDataError):
    """The height probe point lies in the base plane."""


class EventOutsideRecording(DegenerateDataError):
    """A button event falls outside the pose recording span."""


class NoOverlap(DegenerateDataError):
    """Two time series share no common time range."""


class WaypointNotReached(DegenerateDataError):
    """A trace never comes within the gate distance of a waypoint."""

    def __init__(self, message: str, waypoint_index: int | None = None):
        self.waypoint_index = waypoint_index
        super().__init__(message)


class SegmentUncovered(DegenerateDataError):
    """Too many resampling targets on a segment found no crossing."""


class DegenerateAxesWarning(UserWarning):
    """Reference axes are (near-)parallel; roll about them is unobservable."""

"""Recording parsers, stream pairing, and waypoint snapshots.

File formats (UTF-8, ``\\n`` line endings, ``.`` decimal separator):

- pose CSV: header ``t,x,y,z,qx,qy,qz,qw``; a JSON-lines variant with the
  same field names is accepted transparently.
- force CSV: header ``t,Fz``.
- demonstration CSV: header ``t,x,y,z,Fz`` (tip position paired with the
  contact force; orientation is identity).
- pen events, one per line: ``EVT <t> BTN 1`` (press), ``EVT <t> BTN 0``
  (release), ``EVT <t> PWR 1`` (power-on).  Unknown lines are skipped and
  counted.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    EventOutsideRecording,
    FormatError,
    NonMonotonicTime,
    NoOverlap,
)
from .geometry import Pose, TipPoseRecord, compose
from .jsonio import csv_row, dumps_canonical

POSE_CSV_HEADER = "t,x,y,z,qx,qy,qz,qw"
FORCE_CSV_HEADER = "t,Fz"
DEMO_CSV_HEADER = "t,x,y,z,Fz"

_IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


class TimedPose(NamedTuple):
    t: float
    pose: Pose


@dataclass
class PoseRecording:
    """Timestamped fiducial-centroid poses measured from one origin frame."""

    frame_id: str
    samples: list[TimedPose]

    def __post_init__(self):
        if not self.samples:
            raise ValueError("pose recording must not be empty")
        ts = self.times
        if np.any(np.diff(ts) <= 0.0):
            raise ValueError("pose recording timestamps must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])


@dataclass
class ForceRecording:
    """A single-axis contact-force time series (newtons)."""

    t: np.ndarray
    fz: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.fz = np.asarray(self.fz, dtype=float)
        if self.t.shape != self.fz.shape or self.t.ndim != 1:
            raise ValueError("force samples need matching 1-d t and Fz arrays")
        if np.any(np.diff(self.t) <= 0.0):
            raise ValueError("force timestamps must be strictly increasing")

    def __len__(self) -> int:
        return self.t.size


class PenEventKind(enum.Enum):
    BUTTON_PRESS = "press"
    BUTTON_RELEASE = "release"
    POWER_ON = "power_on"


class PenEvent(NamedTuple):
    t: float
    kind: PenEventKind


@dataclass
class DemonstrationTrace:
    """Tip trajectory with optional per-point contact forces.

    ``force_extrapolated`` flags points whose force value came from
    clamping outside the force recording span.
    """

    points: list[TipPoseRecord]
    forces: np.ndarray | None = None
    source: str = "stylus"
    force_extrapolated: np.ndarray | None = None

    def __post_init__(self):
        ts = self.times
        if ts.size and np.any(np.diff(ts) <= 0.0):
            raise ValueError("trace timestamps must be strictly increasing")
        if self.forces is not None:
            self.forces = np.asarray(self.forces, dtype=float)
            if self.forces.shape != (len(self.points),):
                raise ValueError("need exactly one force value per trace point")
        if self.source not in ("stylus", "robot"):
            raise ValueError(f"unknown trace source {self.source!r}")

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.points]).reshape(-1, 3)


@dataclass
class WaypointList:
    """Tip poses captured with the snapshot button, in capture order."""

    waypoints: list[TipPoseRecord] = field(default_factory=list)

    def __post_init__(self):
        ts = [w.t for w in self.waypoints]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("waypoints must be ordered by capture time")

    def __len__(self) -> int:
        return len(self.waypoints)


def _lines(stream: Iterable[str]):
    for number, raw in enumerate(stream, start=1):
        yield number, raw.rstrip("\r\n")


def _parse_float(text: str, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"cannot parse {what} from {text!r}", line) from None


def parse_pose_csv(stream: Iterable[str], frame_id: str = "world") -> PoseRecording:
    """Parse a pose CSV (or JSON-lines) stream into a :class:`PoseRecording`.

    Rows containing non-finite values are dropped with a warning; a bad
    header or unparseable row raises :class:`FormatError`, non-increasing
    timestamps raise :class:`NonMonotonicTime`.
    """
    it = _lines(stream)
    header = None
    for number, text in it:
        if text.strip():
            header = (number, text.strip())
            break
    if header is None:
        raise FormatError("empty input")

    jsonl = header[1].startswith("{")
    if not jsonl and header[1] != POSE_CSV_HEADER:
        raise FormatError(
            f"expected header {POSE_CSV_HEADER!r}, got {header[1]!r}", header[0]
        )

    samples: list[TimedPose] = []
    dropped = 0
    rows = it if not jsonl else _chain_first(header, it)
    for number, text in rows:
        if not text.strip():
            continue
        if jsonl:
            try:
                doc = json.loads(text)
                values = [float(doc[k]) for k in ("t", "x", "y", "z", "qx", "qy", "qz", "qw")]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise FormatError("bad JSON-lines pose record", number) from None
        else:
            fields = text.split(",")
            if len(fields) != 8:
                raise FormatError(f"expected 8 fields, got {len(fields)}", number)
            values = [_parse_float(fields[i], number, POSE_CSV_HEADER.split(",")[i]) for i in range(8)]
        if not all(np.isfinite(values)):
            dropped += 1
            continue
        t = values[0]
        if samples and t <= samples[-1].t:
            raise NonMonotonicTime(
                f"timestamp {t!r} does not increase past {samples[-1].t!r}", number
            )
        samples.append(TimedPose(t, Pose(np.array(values[4:8]), np.array(values[1:4]))))

    if dropped:
        warnings.warn(f"dropped {dropped} pose rows with non-finite values", stacklevel=2)
    if not samples:
        raise FormatError("no valid data rows")
    return PoseRecording(frame_id=frame_id, samples=samples)


def _chain_first(first, rest):
    yield first
    yield from rest


def write_pose_csv(rec: PoseRecording, stream) -> None:
    stream.write(POSE_CSV_HEADER + "\n")
    for t, pose in rec.samples:
        stream.write(csv_row([t, *pose.translation, *pose.rotation]) + "\n")


def parse_force_csv(stream: Iterable[str]) -> ForceRecording:
    """Parse a ``t,Fz`` CSV stream into a :class:`ForceRecording`."""
    it = _lines(stream)
    header = None
    for number, text in it:
        if text.strip():
            header = (number, text.strip())
            break
    if header is None:
        raise FormatError("empty input")
    if header[1] != FORCE_CSV_HEADER:
        raise FormatError(f"expected header {FORCE_CSV_HEADER!r}, got {header[1]!r}", header[0])

    ts: list[float] = []
    fz: list[float] = []
    dropped = 0
    for number, text in it:
        if not text.strip():
            continue
        fields = text.split(",")
        if len(fields) != 2:
            raise FormatError(f"expected 2 fields, got {len(fields)}", number)
        t = _parse_float(fields[0], number, "t")
        f = _parse_float(fields[1], number, "Fz")
        if not (np.isfinite(t) and np.isfinite(f)):
            dropped += 1
            continue
        if ts and t <= ts[-1]:
            raise NonMonotonicTime(f"timestamp {t!r} does not increase past {ts[-1]!r}", number)
        ts.append(t)
        fz.append(f)
    if dropped:
        warnings.warn(f"dropped {dropped} force rows with non-finite values", stacklevel=2)
    if not ts:
        raise FormatError("no valid data rows")
    return ForceRecording(np.array(ts), np.array(fz))


def write_force_csv(rec: ForceRecording, stream) -> None:
    stream.write(FORCE_CSV_HEADER + "\n")
    for t, f in zip(rec.t, rec.fz):
        stream.write(csv_row([t, f]) + "\n")


def parse_demo_csv(stream: Iterable[str], source: str = "stylus") -> DemonstrationTrace:
    """Parse a ``t,x,y,z,Fz`` CSV stream into a :class:`DemonstrationTrace`."""
    it = _lines(stream)
    header = None
    for number, text in it:
        if text.strip():
            header = (number, text.strip())
            break
    if header is None:
        raise FormatError("empty input")
    if header[1] != DEMO_CSV_HEADER:
        raise FormatError(f"expected header {DEMO_CSV_HEADER!r}, got {header[1]!r}", header[0])

    points: list[TipPoseRecord] = []
    forces: list[float] = []
    dropped = 0
    for number, text in it:
        if not text.strip():
            continue
        fields = text.split(",")
        if len(fields) != 5:
            raise FormatError(f"expected 5 fields, got {len(fields)}", number)
        values = [_parse_float(fields[i], number, DEMO_CSV_HEADER.split(",")[i]) for i in range(5)]
        if not all(np.isfinite(values)):
            dropped += 1
            continue
        if points and values[0] <= points[-1].t:
            raise NonMonotonicTime(
                f"timestamp {values[0]!r} does not increase past {points[-1].t!r}", number
            )
        points.append(TipPoseRecord(values[0], np.array(values[1:4]), _IDENTITY_QUAT))
        forces.append(values[4])
    if dropped:
        warnings.warn(f"dropped {dropped} trace rows with non-finite values", stacklevel=2)
    if not points:
        raise FormatError("no valid data rows")
    return DemonstrationTrace(points=points, forces=np.array(forces), source=source)


def write_demo_csv(trace: DemonstrationTrace, stream) -> None:
    if trace.forces is None:
        raise ValueError("demonstration CSV requires per-point forces")
    stream.write(DEMO_CSV_HEADER + "\n")
    for p, f in zip(trace.points, trace.forces):
        stream.write(csv_row([p.t, *p.position, f]) + "\n")


def parse_pen_events(stream: Iterable[str]) -> tuple[list[PenEvent], int]:
    """Parse the pen-event line protocol.

    Returns the events plus the number of skipped (unknown or garbage)
    lines.  Only a malformed timestamp on an ``EVT`` line is fatal.
    """
    events: list[PenEvent] = []
    skipped = 0
    for number, text in _lines(stream):
        text = text.strip()
        if not text:
            continue
        tokens = text.split()
        if tokens[0] != "EVT" or len(tokens) < 3:
            skipped += 1
            continue
        t = _parse_float(tokens[1], number, "event timestamp")
        subtype = tokens[2]
        arg = tokens[3] if len(tokens) > 3 else None
        if subtype == "BTN" and arg == "1":
            kind = PenEventKind.BUTTON_PRESS
        elif subtype == "BTN" and arg == "0":
            kind = PenEventKind.BUTTON_RELEASE
        elif subtype == "PWR" and arg == "1":
            kind = PenEventKind.POWER_ON
        else:
            skipped += 1
            continue
        if events and t < events[-1].t:
            raise NonMonotonicTime(f"event timestamp {t!r} decreases", number)
        events.append(PenEvent(t, kind))
    return events, skipped


def apply_calibration(rec: PoseRecording, calib) -> list[TipPoseRecord]:
    """Map fiducial poses to tip poses through the tip calibration.

    ``calib`` may be a :class:`~styluskit.calib.TipCalibration` or a bare
    :class:`~styluskit.geometry.Pose`.
    """
    transform = calib.transform if hasattr(calib, "transform") else calib
    out = []
    for t, pose in rec.samples:
        tip = compose(pose, transform)
        out.append(TipPoseRecord(t, tip.translation, tip.rotation))
    return out


def snapshot_waypoints(
    tips: list[TipPoseRecord],
    events: list[PenEvent],
    guard: float = 0.1,
) -> WaypointList:
    """Capture the tip record nearest each button press (ties go earlier).

    Presses more than ``guard`` seconds outside the recording span raise
    :class:`EventOutsideRecording`.
    """
    if not tips:
        raise ValueError("snapshot requires a non-empty tip recording")
    times = np.array([p.t for p in tips])
    captured: list[TipPoseRecord] = []
    for event in events:
        if event.kind is not PenEventKind.BUTTON_PRESS:
            continue
        if event.t < times[0] - guard or event.t > times[-1] + guard:
            raise EventOutsideRecording(
                f"button press at t={event.t!r} is outside the recording span "
                f"[{times[0]!r}, {times[-1]!r}] by more than {guard!r} s"
            )
        i = int(np.searchsorted(times, event.t))
        if i <= 0:
            pick = 0
        elif i >= times.size:
            pick = times.size - 1
        else:
            left = event.t - times[i - 1]
            right = times[i] - event.t
            pick = i - 1 if left <= right else i
        captured.append(tips[pick])
    return WaypointList(waypoints=captured)


def pair_force(
    tips: list[TipPoseRecord],
    force: ForceRecording,
    source: str = "stylus",
) -> DemonstrationTrace:
    """Pair tip records with contact forces interpolated at their timestamps.

    Tip points outside the force span receive the nearest endpoint value
    and are flagged in ``force_extrapolated``.  Disjoint time ranges raise
    :class:`NoOverlap`.
    """
    if not tips:
        raise ValueError("cannot pair forces with an empty trace")
    times = np.array([p.t for p in tips])
    if times[-1] < force.t[0] or times[0] > force.t[-1]:
        raise NoOverlap(
            f"trace span [{times[0]!r}, {times[-1]!r}] and force span "
            f"[{force.t[0]!r}, {force.t[-1]!r}] do not overlap"
        )
    values = np.interp(times, force.t, force.fz)
    flagged = (times < force.t[0]) | (times > force.t[-1])
    return DemonstrationTrace(
        points=list(tips), forces=values, source=source, force_extrapolated=flagged
    )


def waypoint_list_to_doc(wl: WaypointList) -> dict:
    return {
        "waypoints": [
            {
                "t": w.t,
                "position": w.position.tolist(),
                "orientation_quat": w.orientation.tolist(),
            }
            for w in wl.waypoints
        ]
    }


def waypoint_list_from_doc(doc: dict) -> WaypointList:
    try:
        waypoints = [
            TipPoseRecord(
                float(w["t"]),
                np.asarray(w["position"], dtype=float),
                np.asarray(w["orientation_quat"], dtype=float),
            )
            for w in doc["waypoints"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad waypoint list document: {exc}") from None
    return WaypointList(waypoints=waypoints)


def save_waypoint_list(wl: WaypointList, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(dumps_canonical(waypoint_list_to_doc(wl)) + "\n")


def load_waypoint_list(path) -> WaypointList:
    with open(path, "r", encoding="utf-8") as f:
        return waypoint_list_from_doc(json.load(f))

"""Quantitative evaluation of demonstrations against an ideal waypoint path.

A demonstration (already expressed in its drawing frame) is split into
segments at the closest approaches to the interior waypoints of the
visiting sequence, each segment is resampled against the ideal line with
a fixed number of uniformly spaced targets, and the signed in-plane
offsets feed the aggregate statistics: mean/std/envelope per sample
index, an epsilon-zone histogram of absolute errors, and a magnitude
spectrum of the contact force.

Signed errors are positive to the left of the travel direction; the
out-of-plane z offset is reported separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyInput,
    FormatError,
    SegmentUncovered,
    ShapeMismatch,
    TooShort,
    WaypointNotReached,
)
from .ingest import DemonstrationTrace, ForceRecording
from .jsonio import csv_row, dumps_canonical


@dataclass
class IdealPath:
    """2D waypoints plus the index sequence in which they are visited."""

    waypoints: np.ndarray
    visiting_sequence: tuple[int, ...]

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        self.visiting_sequence = tuple(int(i) for i in self.visiting_sequence)
        if len(self.visiting_sequence) < 2:
            raise ValueError("visiting sequence needs at least 2 entries")
        for i in self.visiting_sequence:
            if not 0 <= i < self.waypoints.shape[0]:
                raise ValueError(f"visiting sequence index {i} out of range")
        for a, b in zip(self.visiting_sequence, self.visiting_sequence[1:]):
            if np.allclose(self.waypoints[a], self.waypoints[b]):
                raise ValueError("consecutive sequence points must be distinct")

    @property
    def segment_count(self) -> int:
        return len(self.visiting_sequence) - 1

    def segment(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        a = self.waypoints[self.visiting_sequence[k]]
        b = self.waypoints[self.visiting_sequence[k + 1]]
        return a, b


def segment_label(k: int) -> str:
    return chr(ord("A") + k) if k < 26 else f"S{k}"


@dataclass
class SampledSegment:
    """Per-target pairing of one demonstrated segment with its ideal line.

    Arrays are indexed by the uniform targets on the ideal line; entries
    where the demonstration never crossed the target parameter are marked
    in ``missing`` and hold NaN.
    """

    segment_label: str
    ideal_points: np.ndarray
    demo_points: np.ndarray
    signed_error: np.ndarray
    z_offset: np.ndarray
    missing: np.ndarray
    force: np.ndarray | None = None

    @property
    def pair_count(self) -> int:
        return self.ideal_points.shape[0]


@dataclass
class SegmentAggregate:
    """Across-trace statistics per sample index of one segment."""

    segment_label: str
    mean: np.ndarray
    mean_abs: np.ndarray
    std: np.ndarray
    env_min: np.ndarray
    env_max: np.ndarray


@dataclass
class EpsilonHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    epsilon: float
    epsilon_fraction: float


@dataclass
class SpectrumSummary:
    """One-sided force magnitude spectrum with a peak-count summary.

    Amplitudes are scaled so a pure sine of amplitude A lands A in its
    bin (interior bins carry 2|X|/N; DC and Nyquist carry |X|/N).
    """

    sample_rate: float
    bin_width: float
    amplitudes: np.ndarray
    threshold: float
    count_above: int
    sample_count: int

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.amplitudes.size) * self.bin_width


@dataclass
class EvaluationReport:
    config: dict
    segment_labels: list[str]
    per_trace: list[list[SampledSegment]]
    aggregates: list[SegmentAggregate]
    histogram: EpsilonHistogram
    spectra: list[SpectrumSummary] = field(default_factory=list)

    @property
    def epsilon_fraction(self) -> float:
        return self.histogram.epsilon_fraction


def segment_trace(
    trace: DemonstrationTrace, path: IdealPath, gate: float = 0.02
) -> list[DemonstrationTrace]:
    """Split a drawing-frame trace at its closest approaches to the
    interior waypoints, searched in visiting order.

    The search window moves forward only, so revisited waypoints split at
    the correct pass.  A waypoint whose closest approach inside its window
    exceeds ``gate`` raises :class:`WaypointNotReached`.
    """
    if not trace.points:
        raise ValueError("cannot segment an empty trace")
    xy = trace.positions[:, :2]
    splits = [0]
    start = 0
    sequence = path.visiting_sequence
    for order, waypoint_index in enumerate(sequence[1:-1], start=1):
        target = path.waypoints[waypoint_index]
        distances = np.linalg.norm(xy[start:] - target, axis=1)
        inside = distances <= gate
        if not inside.any():
            raise WaypointNotReached(
                f"trace never comes within {gate} m of waypoint {waypoint_index} "
                f"(visit {order}); closest approach {distances.min():.4f} m",
                waypoint_index=waypoint_index,
            )
        first = int(np.argmax(inside))
        after = np.flatnonzero(~inside[first:])
        end = first + (int(after[0]) if after.size else inside.size - first)
        split = start + first + int(np.argmin(distances[first:end]))
        splits.append(split)
        start = split
    splits.append(len(trace.points) - 1)

    pieces = []
    for k in range(len(splits) - 1):
        lo, hi = splits[k], splits[k + 1]
        pieces.append(
            DemonstrationTrace(
                points=trace.points[lo : hi + 1],
                forces=None if trace.forces is None else trace.forces[lo : hi + 1],
                source=trace.source,
            )
        )
    return pieces


def resample_segment(
    sub: DemonstrationTrace,
    line: tuple[np.ndarray, np.ndarray],
    n: int,
    label: str = "A",
    max_missing_fraction: float = 0.2,
) -> SampledSegment:
    """Pair ``n`` uniform targets on the ideal line with the demonstration.

    For each target the demonstrated polyline is linearly interpolated at
    the first crossing of the target's line parameter; targets never
    crossed are marked missing.  More than ``max_missing_fraction``
    missing raises :class:`SegmentUncovered`.
    """
    if n < 2:
        raise ValueError("need at least 2 resampling targets")
    if len(sub.points) < 2:
        raise ValueError("need at least 2 demonstration points")
    a, b = np.asarray(line[0], dtype=float), np.asarray(line[1], dtype=float)
    direction = b - a
    length = float(np.linalg.norm(direction))
    if length < 1e-12:
        raise ValueError("ideal segment has zero length")
    unit = direction / length
    normal = np.array([-unit[1], unit[0]])

    positions = sub.positions
    xy = positions[:, :2]
    u = (xy - a) @ unit / length
    lateral = (xy - a) @ normal
    z = positions[:, 2]

    targets = np.linspace(0.0, 1.0, n)
    seg_index = np.full(n, -1, dtype=int)
    seg_alpha = np.zeros(n)
    scale = n - 1
    for k in range(u.size - 1):
        u0, u1 = u[k], u[k + 1]
        lo, hi = (u0, u1) if u0 <= u1 else (u1, u0)
        i0 = max(0, math.ceil(lo * scale - 1e-9))
        i1 = min(n - 1, math.floor(hi * scale + 1e-9))
        for i in range(i0, i1 + 1):
            if seg_index[i] != -1:
                continue
            denom = u1 - u0
            alpha = 0.5 if denom == 0.0 else (targets[i] - u0) / denom
            seg_index[i] = k
            seg_alpha[i] = min(1.0, max(0.0, alpha))

    missing = seg_index < 0
    if float(missing.mean()) > max_missing_fraction:
        raise SegmentUncovered(
            f"segment {label}: {int(missing.sum())} of {n} targets never crossed"
        )

    ideal = a + targets[:, None] * direction
    demo = np.full((n, 2), np.nan)
    signed = np.full(n, np.nan)
    z_offset = np.full(n, np.nan)
    force = None if sub.forces is None else np.full(n, np.nan)
    hit = ~missing
    k_idx = seg_index[hit]
    alpha = seg_alpha[hit]
    demo[hit] = xy[k_idx] + alpha[:, None] * (xy[k_idx + 1] - xy[k_idx])
    signed[hit] = lateral[k_idx] + alpha * (lateral[k_idx + 1] - lateral[k_idx])
    z_offset[hit] = z[k_idx] + alpha * (z[k_idx + 1] - z[k_idx])
    if force is not None:
        f = sub.forces
        force[hit] = f[k_idx] + alpha * (f[k_idx + 1] - f[k_idx])

    return SampledSegment(
        segment_label=label,
        ideal_points=ideal,
        demo_points=demo,
        signed_error=signed,
        z_offset=z_offset,
        missing=missing,
        force=force,
    )


def _masked_stats(stack: np.ndarray) -> tuple[np.ndarray, ...]:
    mask = ~np.isnan(stack)
    count = mask.sum(axis=0)
    safe = np.maximum(count, 1)
    total = np.where(mask, stack, 0.0).sum(axis=0)
    mean = np.where(count > 0, total / safe, np.nan)
    centered = np.where(mask, stack - mean, 0.0)
    var = (centered * centered).sum(axis=0) / safe
    std = np.where(count > 0, np.sqrt(var), np.nan)
    env_min = np.where(count > 0, np.where(mask, stack, np.inf).min(axis=0), np.nan)
    env_max = np.where(count > 0, np.where(mask, stack, -np.inf).max(axis=0), np.nan)
    total_abs = np.where(mask, np.abs(stack), 0.0).sum(axis=0)
    mean_abs = np.where(count > 0, total_abs / safe, np.nan)
    return mean, mean_abs, std, env_min, env_max


def aggregate(evals: list[list[SampledSegment]]) -> list[SegmentAggregate]:
    """Mean, population std, and envelope per sample index across traces.

    Missing pairs are excluded from their index's statistics.  All traces
    must share segment structure and target count.
    """
    if not evals:
        raise ShapeMismatch("no evaluations to aggregate")
    reference = evals[0]
    for other in evals[1:]:
        if len(other) != len(reference):
            raise ShapeMismatch("traces have different segment counts")
        for seg_a, seg_b in zip(reference, other):
            if seg_a.pair_count != seg_b.pair_count or seg_a.segment_label != seg_b.segment_label:
                raise ShapeMismatch("traces have mismatched segment sampling")

    out = []
    for j, seg in enumerate(reference):
        stack = np.stack([trace[j].signed_error for trace in evals])
        mean, mean_abs, std, env_min, env_max = _masked_stats(stack)
        out.append(
            SegmentAggregate(
                segment_label=seg.segment_label,
                mean=mean,
                mean_abs=mean_abs,
                std=std,
                env_min=env_min,
                env_max=env_max,
            )
        )
    return out


def epsilon_histogram(
    all_errors, epsilon: float = 0.003, bin_width: float = 0.001
) -> EpsilonHistogram:
    """Histogram of absolute errors plus the fraction inside the epsilon zone."""
    if epsilon <= 0.0 or bin_width <= 0.0:
        raise ValueError("epsilon and bin_width must be positive")
    errors = np.asarray(all_errors, dtype=float).ravel()
    errors = np.abs(errors[np.isfinite(errors)])
    if errors.size == 0:
        raise EmptyInput("no finite errors to histogram")
    top = float(errors.max())
    bins = max(1, math.ceil(top / bin_width - 1e-12))
    edges = np.arange(bins + 1) * bin_width
    counts, _ = np.histogram(errors, bins=edges)
    fraction = float(np.mean(errors <= epsilon))
    return EpsilonHistogram(
        bin_edges=edges, counts=counts, epsilon=epsilon, epsilon_fraction=fraction
    )


def force_spectrum(
    force: ForceRecording,
    threshold_ratio: float = 0.05,
    threshold_abs: float | None = None,
) -> SpectrumSummary:
    """Magnitude spectrum of the contact force with a peak count.

    The signal is resampled to a uniform rate (the median original rate)
    by linear interpolation and mean-removed before the FFT.  The peak
    count covers non-DC bins above ``threshold_ratio`` times the largest
    non-DC amplitude, or above ``threshold_abs`` when given.
    """
    if len(force) < 8:
        raise TooShort(f"need at least 8 force samples, got {len(force)}")
    dt = float(np.median(np.diff(force.t)))
    count = int(math.floor((force.t[-1] - force.t[0]) / dt + 1e-9)) + 1
    grid = force.t[0] + np.arange(count) * dt
    x = np.interp(grid, force.t, force.fz)
    x = x - x.mean()
    spectrum = np.abs(np.fft.rfft(x))
    amplitudes = spectrum * (2.0 / count)
    amplitudes[0] = spectrum[0] / count
    if count % 2 == 0:
        amplitudes[-1] = spectrum[-1] / count
    if threshold_abs is not None:
        threshold = float(threshold_abs)
    else:
        peak = float(amplitudes[1:].max()) if amplitudes.size > 1 else 0.0
        threshold = threshold_ratio * peak
    count_above = int(np.sum(amplitudes[1:] > threshold))
    return SpectrumSummary(
        sample_rate=1.0 / dt,
        bin_width=1.0 / (count * dt),
        amplitudes=amplitudes,
        threshold=threshold,
        count_above=count_above,
        sample_count=count,
    )


def evaluate_demonstrations(
    traces: list[DemonstrationTrace],
    path: IdealPath,
    n: int = 100,
    epsilon: float = 0.003,
    bin_width: float = 0.001,
    threshold_ratio: float = 0.05,
    gate: float = 0.02,
    config: dict | None = None,
) -> EvaluationReport:
    """Run the full pipeline: segment, resample, aggregate, histogram, FFT."""
    if not traces:
        raise EmptyInput("no traces to evaluate")
    labels = [segment_label(k) for k in range(path.segment_count)]
    per_trace: list[list[SampledSegment]] = []
    for trace in traces:
        pieces = segment_trace(trace, path, gate=gate)
        sampled = [
            resample_segment(piece, path.segment(k), n, label=labels[k])
            for k, piece in enumerate(pieces)
        ]
        per_trace.append(sampled)

    aggregates = aggregate(per_trace)
    pooled = np.concatenate(
        [seg.signed_error for sampled in per_trace for seg in sampled]
    )
    histogram = epsilon_histogram(pooled, epsilon=epsilon, bin_width=bin_width)

    spectra = []
    for trace in traces:
        if trace.forces is not None and len(trace.points) >= 8:
            recording = ForceRecording(trace.times, trace.forces)
            spectra.append(force_spectrum(recording, threshold_ratio=threshold_ratio))

    return EvaluationReport(
        config=dict(config or {}),
        segment_labels=labels,
        per_trace=per_trace,
        aggregates=aggregates,
        histogram=histogram,
        spectra=spectra,
    )


def path_to_doc(path: IdealPath) -> dict:
    return {
        "waypoints": path.waypoints.tolist(),
        "visiting_sequence": list(path.visiting_sequence),
    }


def path_from_doc(doc: dict) -> IdealPath:
    try:
        return IdealPath(
            waypoints=np.asarray(doc["waypoints"], dtype=float),
            visiting_sequence=tuple(doc["visiting_sequence"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad ideal path document: {exc}") from None


def save_path(path_obj: IdealPath, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(dumps_canonical(path_to_doc(path_obj)) + "\n")


def load_path(path) -> IdealPath:
    with open(path, "r", encoding="utf-8") as f:
        return path_from_doc(json.load(f))


def report_to_doc(report: EvaluationReport) -> dict:
    doc: dict = {"config": report.config}
    doc["segments"] = [
        {
            "label": agg.segment_label,
            "mean": agg.mean.tolist(),
            "mean_abs": agg.mean_abs.tolist(),
            "std": agg.std.tolist(),
            "env_min": agg.env_min.tolist(),
            "env_max": agg.env_max.tolist(),
        }
        for agg in report.aggregates
    ]
    doc["epsilon"] = report.histogram.epsilon
    doc["epsilon_fraction"] = report.histogram.epsilon_fraction
    doc["histogram"] = {
        "bin_edges": report.histogram.bin_edges.tolist(),
        "counts": report.histogram.counts.tolist(),
    }
    doc["spectra"] = [
        {
            "sample_rate": s.sample_rate,
            "bin_width": s.bin_width,
            "threshold": s.threshold,
            "count_above": s.count_above,
            "sample_count": s.sample_count,
            "amplitudes": s.amplitudes.tolist(),
        }
        for s in report.spectra
    ]
    doc["traces"] = [
        {
            "index": i,
            "segments": [
                {
                    "label": seg.segment_label,
                    "signed_error": seg.signed_error.tolist(),
                    "z_offset": seg.z_offset.tolist(),
                    "missing": seg.missing.astype(bool).tolist(),
                }
                for seg in sampled
            ],
        }
        for i, sampled in enumerate(report.per_trace)
    ]
    return doc


def write_report_files(report: EvaluationReport, out_dir) -> list[str]:
    """Write report.json plus the plot-ready CSVs; returns written names."""
    import os

    written = []

    def _write(name: str, text: str) -> None:
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as f:
            f.write(text)
        written.append(name)

    _write("report.json", dumps_canonical(report_to_doc(report)) + "\n")

    lines = ["segment,idx,mean,std,env_min,env_max"]
    for agg in report.aggregates:
        for i in range(agg.mean.size):
            lines.append(
                csv_row(
                    [agg.segment_label, i, agg.mean[i], agg.std[i], agg.env_min[i], agg.env_max[i]]
                )
            )
    _write("segments.csv", "\n".join(lines) + "\n")

    lines = ["bin_lo,bin_hi,count"]
    hist = report.histogram
    for lo, hi, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
        lines.append(csv_row([lo, hi, int(count)]))
    _write("histogram.csv", "\n".join(lines) + "\n")

    for i, spectrum in enumerate(report.spectra):
        lines = ["freq_hz,amplitude"]
        freqs = spectrum.frequencies
        for f, amp in zip(freqs, spectrum.amplitudes):
            lines.append(csv_row([f, amp]))
        _write(f"spectrum_{i:03d}.csv", "\n".join(lines) + "\n")

    return written

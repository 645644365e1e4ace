"""Domain types, track configuration and annotation I/O.

Surfaces are identified by position in :class:`TrackConfig.surfaces`;
labels only matter when reading or writing files.
"""

from __future__ import annotations

import csv
import io
import math
from decimal import Decimal
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class AcsError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AcsError, ValueError):
    """A config or data file could not be parsed or failed validation."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path + (f":{line}" if line is not None else "") + ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class DuplicateLabel(ConfigError):
    pass


class NegativeDuration(ConfigError):
    pass


class AnnotationError(AcsError, ValueError):
    pass


class NonContiguous(AnnotationError):
    pass


class OrderMismatch(AnnotationError):
    pass


class UnknownLabel(AnnotationError):
    pass


class UnsupportedFormat(AcsError, ValueError):
    pass


class Infeasible(AcsError, ValueError):
    """The minimum-chunk constraints cannot be satisfied by the chunk sequence."""


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


FEATURE_KINDS = ("stft", "mel", "mfcc")


@dataclass(frozen=True)
class SpectrogramConfig:
    n_fft: int = 4096
    hop_length: int | None = None
    window: str = "hann"
    feature: str = "mel"
    n_mels: int = 70
    n_mfcc: int = 40
    db_floor: float = -80.0

    def __post_init__(self):
        if self.hop_length is None:
            object.__setattr__(self, "hop_length", self.n_fft // 2)
        if self.n_fft < 2:
            raise ValueError("n_fft must be >= 2")
        if self.hop_length < 1:
            raise ValueError("hop_length must be >= 1")
        if self.feature not in FEATURE_KINDS:
            raise ValueError(f"feature must be one of {FEATURE_KINDS}, got {self.feature!r}")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if not 1 <= self.n_mfcc <= self.n_mels:
            raise ValueError("n_mfcc must be in [1, n_mels]")


@dataclass(frozen=True)
class ChunkConfig:
    chunk_size: int = 91
    chunk_hop: int = 1

    def __post_init__(self):
        if self.chunk_size < 1 or self.chunk_hop < 1:
            raise ValueError("chunk_size and chunk_hop must be >= 1")


@dataclass(frozen=True)
class TrackConfig:
    surfaces: tuple[str, ...]
    min_duration_s: tuple[float, ...]

    def __post_init__(self):
        surfaces = tuple(str(s) for s in self.surfaces)
        durations = tuple(float(d) for d in self.min_duration_s)
        if not surfaces:
            raise ConfigError("track needs at least one surface")
        if len(durations) != len(surfaces):
            raise ConfigError("min_duration_s must have one entry per surface")
        seen = set()
        for label in surfaces:
            if not label or "," in label or label != label.strip():
                raise ConfigError(f"invalid surface label {label!r}")
            if label in seen:
                raise DuplicateLabel(f"duplicate surface label {label!r}")
            seen.add(label)
        for label, d in zip(surfaces, durations):
            if not math.isfinite(d) or d < 0:
                raise NegativeDuration(f"surface {label!r}: min duration must be >= 0, got {d}")
        object.__setattr__(self, "surfaces", surfaces)
        object.__setattr__(self, "min_duration_s", durations)

    @property
    def n(self) -> int:
        return len(self.surfaces)

    def index(self, label: str) -> int:
        try:
            return self.surfaces.index(label)
        except ValueError:
            raise UnknownLabel(f"unknown surface label {label!r}") from None


@dataclass(frozen=True)
class Segment:
    label: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class SegmentAnnotation:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(Segment(s[0], float(s[1]), float(s[2]))
                                                   for s in self.segments))

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.segments]

    @property
    def boundaries_s(self) -> list[float]:
        return [s.end_s for s in self.segments[:-1]]

    @property
    def start_s(self) -> float:
        return self.segments[0].start_s

    @property
    def end_s(self) -> float:
        return self.segments[-1].end_s

    def durations(self) -> list[float]:
        return [s.end_s - s.start_s for s in self.segments]


@dataclass(frozen=True)
class Segmentation:
    """Alignment output: one surface index per chunk plus N-1 boundaries."""

    chunk_labels: tuple[int, ...]
    boundaries_s: tuple[float, ...]
    chunk_times_s: tuple[float, ...]
    total_logp: float = field(default=float("nan"), compare=False)

    def to_annotation(self, track: TrackConfig, end_s: float, start_s: float = 0.0) -> SegmentAnnotation:
        edges = [start_s, *self.boundaries_s, end_s]
        return SegmentAnnotation(tuple(
            (label, edges[i], edges[i + 1]) for i, label in enumerate(track.surfaces)))


def parse_track_config(text: str, path: str | Path | None = None) -> TrackConfig:
    labels: list[str] = []
    durations: list[float] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ConfigError("expected '<label>,<min_duration_s>'", path, lineno)
        label, dur_text = parts
        if not label:
            raise ConfigError("empty surface label", path, lineno)
        if label in seen:
            raise DuplicateLabel(f"duplicate surface label {label!r} (first on line {seen[label]})",
                                 path, lineno)
        try:
            dur = float(dur_text)
        except ValueError:
            raise ConfigError(f"min_duration_s {dur_text!r} is not a number", path, lineno) from None
        if not math.isfinite(dur) or dur < 0:
            raise NegativeDuration(f"min_duration_s for {label!r} must be >= 0, got {dur_text}",
                                   path, lineno)
        seen[label] = lineno
        labels.append(label)
        durations.append(dur)
    if not labels:
        raise ConfigError("no surfaces defined", path)
    return TrackConfig(tuple(labels), tuple(durations))


def load_track_config(path: str | Path) -> TrackConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"not UTF-8 text: {exc}", path) from None
    return parse_track_config(text, path)


def format_track_config(track: TrackConfig) -> str:
    return "".join(f"{label},{d!r}\n" for label, d in zip(track.surfaces, track.min_duration_s))


def save_track_config(track: TrackConfig, path: str | Path) -> None:
    Path(path).write_text(format_track_config(track), encoding="utf-8")


def validate_annotation(ann: SegmentAnnotation, track: TrackConfig) -> SegmentAnnotation:
    """Check that ``ann`` is one complete, contiguous run of ``track``.

    Raises UnknownLabel, OrderMismatch or NonContiguous; returns ``ann``.
    """
    if not ann.segments:
        raise OrderMismatch("annotation has no segments")
    for seg in ann.segments:
        if seg.label not in track.surfaces:
            raise UnknownLabel(f"unknown surface label {seg.label!r}")
    if tuple(ann.labels) != track.surfaces:
        raise OrderMismatch(f"label sequence {ann.labels} does not match track {list(track.surfaces)}")
    for i, seg in enumerate(ann.segments):
        if not (math.isfinite(seg.start_s) and math.isfinite(seg.end_s)) or seg.start_s >= seg.end_s:
            raise NonContiguous(f"segment {i} ({seg.label}) has start {seg.start_s} >= end {seg.end_s}")
        if i and ann.segments[i - 1].end_s != seg.start_s:
            prev = ann.segments[i - 1].end_s
            kind = "gap" if prev < seg.start_s else "overlap"
            raise NonContiguous(f"{kind} between segments {i - 1} and {i} at {prev}-{seg.start_s}")
    return ann


def format_annotation(ann: SegmentAnnotation) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "start_s", "end_s"])
    for seg in ann.segments:
        writer.writerow([seg.label, _fmt_seconds(seg.start_s), _fmt_seconds(seg.end_s)])
    return buf.getvalue()


def _fmt_seconds(t: float) -> str:
    # shortest round-trip decimal, positional, at least 3 fractional digits
    text = format(Decimal(repr(float(t))), "f")
    whole, _, frac = text.partition(".")
    return f"{whole}.{frac.ljust(3, '0')}"


def parse_annotation(text: str, path: str | Path | None = None) -> SegmentAnnotation:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["label", "start_s", "end_s"]:
        raise ConfigError("expected header 'label,start_s,end_s'", path, 1)
    segments = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ConfigError(f"expected 3 columns, got {len(row)}", path, lineno)
        try:
            start, end = float(row[1]), float(row[2])
        except ValueError:
            raise ConfigError(f"non-numeric time in row {row}", path, lineno) from None
        segments.append((row[0].strip(), start, end))
    return SegmentAnnotation(tuple(segments))


def load_annotation(path: str | Path) -> SegmentAnnotation:
    path = Path(path)
    return parse_annotation(path.read_text(encoding="utf-8"), path)


def save_annotation(ann: SegmentAnnotation, path: str | Path) -> None:
    Path(path).write_text(format_annotation(ann), encoding="utf-8")


def labels_at_times(ann: SegmentAnnotation, track: TrackConfig, times_s: Sequence[float]) -> np.ndarray:
    """Surface index whose half-open interval [start, end) contains each time."""
    times = np.asarray(times_s, dtype=np.float64)
    edges = np.array([s.start_s for s in ann.segments] + [ann.end_s])
    if times.size and (times.min() < edges[0] or times.max() >= edges[-1]):
        bad = times[(times < edges[0]) | (times >= edges[-1])][0]
        raise AnnotationError(f"time {bad:.6f} s lies outside annotation span "
                              f"[{edges[0]}, {edges[-1]})")
    seg_idx = np.searchsorted(edges, times, side="right") - 1
    index = np.array([track.index(s.label) for s in ann.segments])
    return index[seg_idx]

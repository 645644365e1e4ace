"""Seeded synthetic track runs with exact ground-truth boundaries.

Each surface is white noise band-passed around its own center frequency,
with a slow amplitude wobble. Runs are reproducible from ``seed`` alone
(numpy ``PCG64``); dataset run ``i`` uses ``seed + i``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import butter, sosfilt

from .core import AudioClip, SegmentAnnotation, TrackConfig, save_annotation, validate_annotation
from .dsp import save_wav

CROSSFADE_S = 0.020
PEAK = 0.9
MIN_DEFAULT_DURATION_S = 15.0
DEFAULT_DURATION_SPREAD_S = 2.0


@dataclass(frozen=True)
class SynthSpec:
    track: TrackConfig
    sample_rate: int = 22050
    duration_range_s: tuple[tuple[float, float], ...] | None = None
    center_freqs_hz: tuple[float, ...] | None = None
    bandwidth_octaves: float = 0.5
    amplitude_jitter: float = 0.1
    seed: int = 0

    def __post_init__(self):
        n = self.track.n
        nyquist = self.sample_rate / 2.0
        if self.duration_range_s is None:
            ranges = []
            for d in self.track.min_duration_s:
                lo = max(d, MIN_DEFAULT_DURATION_S)
                ranges.append((lo, lo + DEFAULT_DURATION_SPREAD_S))
            object.__setattr__(self, "duration_range_s", tuple(ranges))
        else:
            object.__setattr__(self, "duration_range_s",
                               tuple((float(a), float(b)) for a, b in self.duration_range_s))
        if self.center_freqs_hz is None:
            freqs = np.geomspace(200.0, 0.8 * nyquist, n) if n > 1 else np.array([200.0])
            object.__setattr__(self, "center_freqs_hz", tuple(float(f) for f in freqs))
        else:
            object.__setattr__(self, "center_freqs_hz", tuple(float(f) for f in self.center_freqs_hz))

        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if len(self.duration_range_s) != n or len(self.center_freqs_hz) != n:
            raise ValueError("duration_range_s and center_freqs_hz need one entry per surface")
        for (lo, hi), dmin, label in zip(self.duration_range_s, self.track.min_duration_s,
                                         self.track.surfaces):
            if not 0 < lo <= hi:
                raise ValueError(f"{label}: duration range ({lo}, {hi}) must satisfy 0 < min <= max")
            if lo < dmin:
                raise ValueError(f"{label}: duration range minimum {lo} below track minimum {dmin}")
        for f in self.center_freqs_hz:
            if not 0 < f < nyquist:
                raise ValueError(f"center frequency {f} Hz must lie in (0, {nyquist})")
        if self.bandwidth_octaves <= 0:
            raise ValueError("bandwidth_octaves must be positive")
        if not 0 <= self.amplitude_jitter < 1:
            raise ValueError("amplitude_jitter must be in [0, 1)")


def _band_noise(rng: np.random.Generator, n: int, center: float, octaves: float,
                sr: int, jitter: float) -> np.ndarray:
    nyquist = sr / 2.0
    lo = center * 2.0 ** (-octaves / 2)
    hi = min(center * 2.0 ** (octaves / 2), 0.999 * nyquist)
    sos = butter(1, [lo, hi], btype="bandpass", fs=sr, output="sos")   # 2nd-order band-pass
    x = sosfilt(sos, rng.standard_normal(n))
    x /= np.sqrt(np.mean(x ** 2)) + 1e-12
    env_freq = rng.uniform(0.2, 1.0)
    phase = rng.uniform(0, 2 * np.pi)
    t = np.arange(n) / sr
    return x * (1.0 + jitter * np.sin(2 * np.pi * env_freq * t + phase))


def generate_run(spec: SynthSpec) -> tuple[AudioClip, SegmentAnnotation]:
    """One run: audio plus the annotation with exact boundary times.

    Boundaries sit on sample positions; neighbouring segments overlap by a
    20 ms equal-power crossfade centered on each boundary.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    sr = spec.sample_rate
    durations = [rng.uniform(lo, hi) if hi > lo else lo for lo, hi in spec.duration_range_s]
    edges = np.round(np.concatenate([[0.0], np.cumsum(durations)]) * sr).astype(np.int64)
    total = int(edges[-1])
    half = int(round(CROSSFADE_S * sr / 2))
    fade_len = 2 * half
    ramp = (np.arange(fade_len) + 0.5) / fade_len
    fade_in, fade_out = np.sin(ramp * np.pi / 2), np.cos(ramp * np.pi / 2)

    out = np.zeros(total)
    for k in range(spec.track.n):
        a = max(int(edges[k]) - half, 0)
        b = min(int(edges[k + 1]) + half, total)
        piece = _band_noise(rng, b - a, spec.center_freqs_hz[k], spec.bandwidth_octaves, sr,
                            spec.amplitude_jitter)
        if k > 0:
            n_in = min(fade_len, b - a)
            piece[:n_in] *= fade_in[:n_in]
        if k < spec.track.n - 1:
            n_out = min(fade_len, b - a)
            piece[-n_out:] *= fade_out[-n_out:]
        out[a:b] += piece
    out *= PEAK / np.max(np.abs(out))
    # quantize to the 16-bit grid so the in-memory clip equals what gets written
    out = np.round(out * 32767.0) / 32767.0

    times = edges / sr
    ann = SegmentAnnotation(tuple((label, float(times[k]), float(times[k + 1]))
                                  for k, label in enumerate(spec.track.surfaces)))
    validate_annotation(ann, spec.track)
    return AudioClip(out, sr), ann


def with_seed(spec: SynthSpec, seed: int) -> SynthSpec:
    return SynthSpec(spec.track, spec.sample_rate, spec.duration_range_s, spec.center_freqs_hz,
                     spec.bandwidth_octaves, spec.amplitude_jitter, seed)


def generate_dataset(spec: SynthSpec, runs: int, out_dir: str | Path) -> Path:
    """Write ``run_<i>.wav``/``run_<i>.csv`` pairs and ``manifest.csv``.

    Manifest paths are relative to ``out_dir`` so the dataset can be moved.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(runs):
        clip, ann = generate_run(with_seed(spec, spec.seed + i))
        wav, csv_path = f"run_{i}.wav", f"run_{i}.csv"
        save_wav(clip, out_dir / wav)
        save_annotation(ann, out_dir / csv_path)
        rows.append((wav, csv_path))
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["wav_path", "annotation_path"])
        writer.writerows(rows)
    return manifest


def read_manifest(path: str | Path) -> list[tuple[Path, Path]]:
    """(wav, annotation) pairs; relative entries resolve against the manifest's folder."""
    path = Path(path)
    base = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["wav_path", "annotation_path"]:
        raise ValueError(f"{path}: expected header 'wav_path,annotation_path'")
    pairs = []
    for row in rows[1:]:
        if not row:
            continue
        wav, ann = (Path(os.path.expanduser(c.strip())) for c in row[:2])
        pairs.append((wav if wav.is_absolute() else base / wav,
                      ann if ann.is_absolute() else base / ann))
    return pairs


def default_track(n: int, min_duration_s: float | Sequence[float] = 0.0) -> TrackConfig:
    """Track ``pre, s1, ..., post`` with ``n`` surfaces in total."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        labels = ["track"]
    else:
        labels = ["pre", *(f"s{i}" for i in range(1, n - 1)), "post"]
    if isinstance(min_duration_s, (int, float)):
        min_duration_s = [float(min_duration_s)] * n
    return TrackConfig(tuple(labels), tuple(min_duration_s))

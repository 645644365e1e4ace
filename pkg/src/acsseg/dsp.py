"""WAV decoding, spectrogram features and chunk extraction."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct, rfft
from scipy.io import wavfile

from .core import (AcsError, AnnotationError, AudioClip, ChunkConfig, SegmentAnnotation,
                   SpectrogramConfig, TrackConfig, UnsupportedFormat, labels_at_times)

EPS = 1e-10


class TooShort(AcsError, ValueError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    data: np.ndarray            # frames x bins
    frame_hop_s: float
    frame_center_offset_s: float
    config: SpectrogramConfig
    sample_rate: int = 0

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ChunkSet:
    features: FeatureMatrix
    start_frames: np.ndarray
    center_times_s: np.ndarray
    chunk_config: ChunkConfig
    labels: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.start_frames)

    def chunk(self, i: int) -> np.ndarray:
        s = int(self.start_frames[i])
        return self.features.data[s:s + self.chunk_config.chunk_size]

    def stacked(self) -> np.ndarray:
        """View of all chunks as an (M, chunk_size, bins) array."""
        cs = self.chunk_config
        win = sliding_window_view(self.features.data, cs.chunk_size, axis=0)  # (F-cs+1, bins, cs)
        return win[::cs.chunk_hop][:len(self)].transpose(0, 2, 1)


# -- audio -------------------------------------------------------------------

def load_wav(path: str | Path) -> AudioClip:
    """Read a PCM/float WAV file as a mono clip scaled to [-1, 1].

    Multi-channel audio is averaged. Integer formats are divided by their
    full-scale value (8-bit is unsigned with offset 128).
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(12)
    if len(head) < 12 or head[:4] not in (b"RIFF", b"RIFX", b"RF64") or head[8:12] != b"WAVE":
        raise UnsupportedFormat(f"{path}: not a RIFF/WAVE file")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            sr, data = wavfile.read(path)
    except wavfile.WavFileWarning as exc:
        raise UnsupportedFormat(f"{path}: truncated or malformed file ({exc})") from None
    except (ValueError, struct.error, EOFError) as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from None

    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:   # 24-bit is returned left-justified in int32
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: unsupported sample type {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise UnsupportedFormat(f"{path}: zero-length audio")
    return AudioClip(samples, sr)


def save_wav(clip: AudioClip, path: str | Path) -> None:
    """Write ``clip`` as 16-bit PCM mono."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    wavfile.write(path, clip.sample_rate, pcm)


def normalize(clip: AudioClip) -> AudioClip:
    peak = np.max(np.abs(clip.samples)) if clip.samples.size else 0.0
    if peak == 0:
        return clip
    return AudioClip(clip.samples / peak, clip.sample_rate)


# -- spectrogram ---------------------------------------------------------------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular (unnormalized, peak 1) mel filters, shape (n_mels, n_fft//2+1)."""
    if fmax is None:
        fmax = sample_rate / 2.0
    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_freqs - lower) / (center - lower)
    down = (upper - bin_freqs) / (upper - center)
    return np.maximum(0.0, np.minimum(up, down))


def mel_center_freqs(sample_rate: int, n_mels: int) -> np.ndarray:
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    return edges[1:-1]


def n_frames_for(n_samples: int, n_fft: int, hop_length: int) -> int:
    if n_samples < n_fft:
        return 0
    return (n_samples - n_fft) // hop_length + 1


def power_spectrogram(samples: np.ndarray, n_fft: int, hop_length: int) -> np.ndarray:
    """Hann-windowed |rfft|^2 of uncentered frames, shape (frames, n_fft//2+1)."""
    window = np.hanning(n_fft + 1)[:-1]     # periodic Hann
    frames = sliding_window_view(samples, n_fft)[::hop_length]
    return np.abs(rfft(frames * window, axis=1)) ** 2


def to_db(power: np.ndarray, floor: float) -> np.ndarray:
    return np.maximum(10.0 * np.log10(power + EPS), floor)


def spectrogram(clip: AudioClip, cfg: SpectrogramConfig | None = None) -> FeatureMatrix:
    cfg = cfg or SpectrogramConfig()
    n = len(clip.samples)
    if n < cfg.n_fft:
        raise TooShort(f"clip has {n} samples, fewer than n_fft={cfg.n_fft}")
    power = power_spectrogram(clip.samples, cfg.n_fft, cfg.hop_length)
    if cfg.feature == "stft":
        data = to_db(power, cfg.db_floor)
    else:
        fb = mel_filterbank(clip.sample_rate, cfg.n_fft, cfg.n_mels)
        data = to_db(power @ fb.T, cfg.db_floor)
        if cfg.feature == "mfcc":
            data = dct(data, type=2, norm="ortho", axis=1)[:, :cfg.n_mfcc]
    sr = clip.sample_rate
    return FeatureMatrix(
        data=np.ascontiguousarray(data),
        frame_hop_s=cfg.hop_length / sr,
        frame_center_offset_s=(cfg.n_fft / 2) / sr,
        config=cfg,
        sample_rate=sr,
    )


# -- chunks --------------------------------------------------------------------

def n_chunks_for(n_frames: int, cc: ChunkConfig) -> int:
    if n_frames < cc.chunk_size:
        return 0
    return (n_frames - cc.chunk_size) // cc.chunk_hop + 1


def chunk_center_times(n_chunks: int, cc: ChunkConfig, frame_hop_s: float,
                       frame_center_offset_s: float) -> np.ndarray:
    starts = np.arange(n_chunks) * cc.chunk_hop
    return (starts + cc.chunk_size // 2) * frame_hop_s + frame_center_offset_s


def chunk_duration_s(cc: ChunkConfig, hop_length: int, sample_rate: int) -> float:
    """Nominal chunk span as quoted in tables: chunk_size * hop / sr."""
    return cc.chunk_size * hop_length / sample_rate


def extract_chunks(fm: FeatureMatrix, cc: ChunkConfig | None = None,
                   ann: SegmentAnnotation | None = None,
                   track: TrackConfig | None = None) -> ChunkSet:
    """Slice ``fm`` into overlapping chunks, labelling each by its middle frame.

    A chunk's time is the center of its middle frame. With ``ann`` given the
    label is the surface whose [start, end) contains that time; ``track``
    maps labels to indices and defaults to the annotation's own order.
    """
    cc = cc or ChunkConfig()
    m = n_chunks_for(fm.n_frames, cc)
    if m == 0:
        raise TooShort(f"{fm.n_frames} frames, fewer than chunk_size={cc.chunk_size}")
    starts = np.arange(m) * cc.chunk_hop
    times = chunk_center_times(m, cc, fm.frame_hop_s, fm.frame_center_offset_s)
    labels = None
    if ann is not None:
        if track is None:
            track = TrackConfig(tuple(ann.labels), (0.0,) * len(ann.segments))
        try:
            labels = labels_at_times(ann, track, times)
        except AnnotationError as exc:
            raise AnnotationError(f"annotation must cover the whole audio: {exc}") from None
    return ChunkSet(fm, starts, times, cc, labels)


# -- feature dump --------------------------------------------------------------

_ACSF_HEADER = struct.Struct("<4sIIIdd")


def save_features(fm: FeatureMatrix, path: str | Path) -> None:
    header = _ACSF_HEADER.pack(b"ACSF", 1, fm.n_frames, fm.n_bins,
                               fm.frame_hop_s, fm.frame_center_offset_s)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(fm.data, dtype="<f4").tobytes())


def load_features(path: str | Path) -> tuple[np.ndarray, float, float]:
    """Read an ACSF dump; returns (data, frame_hop_s, frame_center_offset_s)."""
    raw = Path(path).read_bytes()
    if len(raw) < _ACSF_HEADER.size:
        raise UnsupportedFormat(f"{path}: truncated feature header")
    magic, version, frames, bins, hop_s, off_s = _ACSF_HEADER.unpack_from(raw)
    if magic != b"ACSF" or version != 1:
        raise UnsupportedFormat(f"{path}: not an ACSF v1 feature file")
    body = raw[_ACSF_HEADER.size:]
    if len(body) != frames * bins * 4:
        raise UnsupportedFormat(f"{path}: expected {frames * bins * 4} data bytes, got {len(body)}")
    data = np.frombuffer(body, dtype="<f4").reshape(frames, bins)
    return data, hop_s, off_s

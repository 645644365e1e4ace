"""Per-chunk surface probabilities.

Two sources are provided: a nearest-centroid model trained on labelled
chunks, and an importer for probability matrices computed elsewhere (e.g. a
CNN). Alignment only ever sees the resulting :class:`ProbMatrix`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import log_softmax, logsumexp

from .core import AcsError, ConfigError, TrackConfig
from .dsp import ChunkSet

PROB_FLOOR = 1e-12
ROW_SUM_TOL = 1e-3


class RowNotNormalized(ConfigError):
    pass


class DimensionMismatch(AcsError, ValueError):
    pass


class MissingClass(AcsError, ValueError):
    def __init__(self, message: str, surfaces: Sequence[int] = ()):
        super().__init__(message)
        self.surfaces = list(surfaces)


@dataclass(frozen=True)
class ProbMatrix:
    logp: np.ndarray            # M x N
    chunk_times_s: np.ndarray   # M

    def __post_init__(self):
        logp = np.asarray(self.logp, dtype=np.float64)
        times = np.asarray(self.chunk_times_s, dtype=np.float64)
        if logp.ndim != 2 or logp.shape[0] == 0 or logp.shape[1] == 0:
            raise ValueError(f"logp must be a non-empty M x N matrix, got shape {logp.shape}")
        if times.shape != (logp.shape[0],):
            raise ValueError("chunk_times_s must have one entry per row of logp")
        if np.isnan(logp).any() or np.isposinf(logp).any():
            raise ValueError("logp entries must be finite or -inf")
        if not np.isfinite(logp).any(axis=1).all():
            raise ValueError("every row of logp needs at least one finite entry")
        object.__setattr__(self, "logp", logp)
        object.__setattr__(self, "chunk_times_s", times)

    @property
    def shape(self) -> tuple[int, int]:
        return self.logp.shape

    def row_normalized(self, tol: float = 1e-6) -> bool:
        return bool(np.all(np.abs(logsumexp(self.logp, axis=1)) <= tol))


@dataclass(frozen=True)
class CentroidModel:
    centroids: np.ndarray       # N x F
    temperature: float = 1.0
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("centroids must be an N x F matrix with N >= 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "temperature", float(self.temperature))
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_classes(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def chunk_features(cs: ChunkSet) -> np.ndarray:
    """Time-mean of each chunk, shape (M, bins)."""
    if len(cs) == 0:
        raise ValueError("empty ChunkSet")
    return cs.stacked().mean(axis=1, dtype=np.float64)


def train_centroid(runs: Iterable[ChunkSet], n_surfaces: int, temperature: float = 1.0,
                   labels: Sequence[str] = ()) -> CentroidModel:
    sums = None
    counts = np.zeros(n_surfaces, dtype=np.int64)
    for cs in runs:
        if cs.labels is None:
            raise ValueError("training ChunkSet has no labels")
        feats = chunk_features(cs)
        if sums is None:
            sums = np.zeros((n_surfaces, feats.shape[1]))
        elif feats.shape[1] != sums.shape[1]:
            raise DimensionMismatch(f"feature dimension {feats.shape[1]} != {sums.shape[1]}")
        np.add.at(sums, cs.labels, feats)
        counts += np.bincount(cs.labels, minlength=n_surfaces)
    missing = [k for k in range(n_surfaces) if counts[k] == 0]
    if sums is None or missing:
        names = [labels[k] if k < len(labels) else str(k) for k in (missing or range(n_surfaces))]
        raise MissingClass(f"no training chunks for surface(s): {', '.join(names)}", missing)
    return CentroidModel(sums / counts[:, None], temperature, tuple(labels))


def predict_features(model: CentroidModel, feats: np.ndarray) -> np.ndarray:
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != model.dim:
        raise DimensionMismatch(f"feature dimension {feats.shape[-1]} != model dimension {model.dim}")
    d2 = ((feats[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    return log_softmax(-d2 / model.temperature, axis=1)


def predict(model: CentroidModel, cs: ChunkSet) -> ProbMatrix:
    return ProbMatrix(predict_features(model, chunk_features(cs)), cs.center_times_s)


def save_model(model: CentroidModel, path: str | Path) -> None:
    labels = model.labels or tuple(str(k) for k in range(model.n_classes))
    lines = [f"temperature={model.temperature!r}", f"F={model.dim}"]
    for label, row in zip(labels, model.centroids):
        lines.append(f"{label}:" + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path, track: TrackConfig | None = None) -> CentroidModel:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if len(lines) < 3 or not lines[0].startswith("temperature=") or not lines[1].startswith("F="):
        raise ConfigError("expected 'temperature=<t>' and 'F=<dim>' header lines", path)
    try:
        temperature = float(lines[0].split("=", 1)[1])
        dim = int(lines[1].split("=", 1)[1])
    except ValueError:
        raise ConfigError("malformed model header", path) from None
    labels, rows = [], []
    for lineno, line in enumerate(lines[2:], start=3):
        label, sep, values = line.rpartition(":")
        if not sep:
            raise ConfigError("expected '<label>:<v1>,...'", path, lineno)
        try:
            row = [float(v) for v in values.split(",")]
        except ValueError:
            raise ConfigError("non-numeric centroid value", path, lineno) from None
        if len(row) != dim:
            raise ConfigError(f"expected {dim} values, got {len(row)}", path, lineno)
        labels.append(label)
        rows.append(row)
    if track is not None and tuple(labels) != track.surfaces:
        raise ConfigError(f"model labels {labels} do not match track {list(track.surfaces)}", path)
    return CentroidModel(np.array(rows), temperature, tuple(labels))


def probs_to_logp(probs: np.ndarray, tol: float = ROW_SUM_TOL) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if (probs < 0).any():
        r = int(np.argwhere(probs < 0)[0, 0])
        raise ConfigError(f"negative probability in row {r}")
    sums = probs.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise RowNotNormalized(f"row {bad[0]} sums to {sums[bad[0]]:.6g}, not 1 (tol {tol})")
    logp = np.log(np.maximum(probs, PROB_FLOOR))
    # rows within tolerance are renormalized so logsumexp(row) == 0
    return logp - logsumexp(logp, axis=1, keepdims=True)


def import_probs(path: str | Path, track: TrackConfig,
                 chunk_times_s: Sequence[float] | None = None) -> ProbMatrix:
    """Read a probability CSV whose columns follow ``track`` order.

    Rows need not sum to exactly 1 (tolerance 1e-3); zero probabilities are
    floored at 1e-12 before taking logs and each row is then renormalized. Times come from an optional leading
    ``time_s`` column, else from ``chunk_times_s``.
    """
    path = Path(path)
    rows = list(csv.reader(io.StringIO(path.read_text(encoding="utf-8"))))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError("empty probability file", path)
    header = [c.strip() for c in rows[0]]
    has_time = bool(header) and header[0] == "time_s"
    labels = header[1:] if has_time else header
    if tuple(labels) != track.surfaces:
        raise DimensionMismatch(f"{path}: columns {labels} do not match track surfaces "
                                f"{list(track.surfaces)}")
    n = track.n
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DimensionMismatch(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            values.append([float(c) for c in row])
        except ValueError:
            raise ConfigError("non-numeric value", path, lineno) from None
    if not values:
        raise ConfigError("no probability rows", path)
    arr = np.array(values)
    try:
        logp = probs_to_logp(arr[:, -n:])
    except ConfigError as exc:
        raise type(exc)(str(exc), path) from None
    if has_time:
        times = arr[:, 0]
    elif chunk_times_s is not None:
        times = np.asarray(chunk_times_s, dtype=np.float64)
        if len(times) != len(arr):
            raise DimensionMismatch(f"{path}: {len(arr)} rows but {len(times)} chunk times")
    else:
        raise ConfigError("no time_s column and no chunk times supplied", path)
    return ProbMatrix(logp, times)


def format_probs(pm: ProbMatrix, track: TrackConfig, with_time: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow((["time_s"] if with_time else []) + list(track.surfaces))
    probs = np.exp(pm.logp)
    for t, row in zip(pm.chunk_times_s, probs):
        writer.writerow(([repr(float(t))] if with_time else []) + [repr(float(p)) for p in row])
    return buf.getvalue()


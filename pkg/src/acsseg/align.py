"""ACS-DTW: order- and duration-constrained alignment of chunk probabilities.

The cost matrix ``D`` has one row per surface and one column per chunk.
``D[n, m]`` is the best total log-probability of labelling chunks ``0..m``
with surfaces ``0..n`` in order, where every surface ``k >= 1`` holds at
least ``min_chunks[k]`` chunks. Two moves reach a cell:

* horizontal: chunk ``m`` stays on surface ``n`` (from ``D[n, m-1]``);
* diagonal: surface ``n`` is entered and immediately given its minimum
  block of ``min_chunks[n]`` chunks ending at ``m`` (from
  ``D[n-1, m-min_chunks[n]]``).

There is no vertical move, so each chunk gets exactly one surface.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .classify import ProbMatrix
from .core import (AcsError, ConfigError, Infeasible, SegmentAnnotation, Segmentation, TrackConfig,
                   validate_annotation)

UNREACHABLE = 0
HORIZONTAL = 1
DIAGONAL = 2

BRUTE_FORCE_LIMIT = 10**7


class TooLarge(AcsError, ValueError):
    pass


@dataclass(frozen=True)
class MinChunks:
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise ValueError("min chunks needs at least one surface")
        if any(c < 1 for c in counts):
            raise ValueError(f"every min chunk count must be >= 1, got {counts}")
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, i):
        return self.counts[i]

    def __iter__(self):
        return iter(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def frontier(self) -> np.ndarray:
        """First reachable chunk index per surface: cumsum(min_chunks) - 1."""
        return np.cumsum(self.counts) - 1


@dataclass(frozen=True)
class CostMatrix:
    D: np.ndarray        # N x M, -inf where unreachable
    steps: np.ndarray    # N x M int8: UNREACHABLE / HORIZONTAL / DIAGONAL

    @property
    def score(self) -> float:
        return float(self.D[-1, -1])


def _as_min_chunks(mc) -> MinChunks:
    return mc if isinstance(mc, MinChunks) else MinChunks(tuple(mc))


def _check_feasible(n_chunks: int, n_surfaces: int, mc: MinChunks) -> None:
    if len(mc) != n_surfaces:
        raise ValueError(f"{len(mc)} min chunk counts for {n_surfaces} surfaces")
    if mc.total > n_chunks:
        raise Infeasible(f"sum of min chunks ({mc.total}) exceeds number of chunks M={n_chunks}")


def min_chunks_from_annotations(anns: Sequence[SegmentAnnotation], track: TrackConfig,
                                chunk_hop_s: float, edge_offset_s: float = 0.0) -> MinChunks:
    """Per-surface minimum chunk counts from training annotations.

    ``min_chunks[n] = max(1, floor(min_duration_n / chunk_hop_s))`` where the
    minimum runs over all annotations.

    Chunk times start at the center of the first chunk, not at 0, so the first
    and last surfaces see fewer chunks than their duration suggests.
    ``edge_offset_s`` (typically the first chunk's center time) is subtracted
    from those two surfaces' durations; the default 0 leaves them untouched.
    """
    if not anns:
        raise ValueError("no annotations to estimate minimum durations from")
    if not chunk_hop_s > 0:
        raise ValueError("chunk_hop_s must be positive")
    min_dur = [math.inf] * track.n
    for ann in anns:
        validate_annotation(ann, track)
        for n, d in enumerate(ann.durations()):
            if n == 0:
                d -= edge_offset_s
            if n == track.n - 1:
                d -= edge_offset_s
            min_dur[n] = min(min_dur[n], d)
    # the small epsilon keeps exact multiples (0.3 / 0.1) from flooring down
    return MinChunks(tuple(max(1, math.floor(d / chunk_hop_s + 1e-9)) for d in min_dur))


def fill_cost_matrix(probs: ProbMatrix | np.ndarray, mc) -> CostMatrix:
    logp = probs.logp if isinstance(probs, ProbMatrix) else np.asarray(probs, dtype=np.float64)
    mc = _as_min_chunks(mc)
    n_chunks, n_surf = logp.shape
    _check_feasible(n_chunks, n_surf, mc)

    D = np.full((n_surf, n_chunks), -np.inf)
    steps = np.zeros((n_surf, n_chunks), dtype=np.int8)
    first = mc.frontier()

    D[0] = np.cumsum(logp[:, 0])
    D[0, :first[0]] = -np.inf
    steps[0, first[0]:] = HORIZONTAL

    neg_inf = -math.inf
    for n in range(1, n_surf):
        k = mc[n]
        col = logp[:, n]
        # window[m] = sum of col[m-k+1 .. m], the block entered by a diagonal move
        window = np.full(n_chunks, neg_inf)
        window[k - 1:] = sliding_window_view(col, k).sum(axis=1)
        col_l = col.tolist()
        win_l = window.tolist()
        prev_row = D[n - 1].tolist()
        row = [neg_inf] * n_chunks
        step_row = [UNREACHABLE] * n_chunks
        h_prev = neg_inf
        for m in range(int(first[n]), n_chunks):
            h = h_prev + col_l[m]
            g = prev_row[m - k] + win_l[m]
            # ties go diagonal: backtrace then places each transition as late as possible
            if g >= h:
                best, step = g, DIAGONAL
            else:
                best, step = h, HORIZONTAL
            if best == neg_inf:
                step = UNREACHABLE
            row[m] = best
            step_row[m] = step
            h_prev = best
        D[n] = row
        steps[n] = step_row
    return CostMatrix(D, steps)


def backtrace(cm: CostMatrix, mc) -> np.ndarray:
    """Recover per-chunk surface indices from the recorded steps."""
    mc = _as_min_chunks(mc)
    n_surf, n_chunks = cm.D.shape
    n, m = n_surf - 1, n_chunks - 1
    if not np.isfinite(cm.D[n, m]):
        raise Infeasible("terminal cell of the cost matrix is unreachable")
    labels = np.empty(n_chunks, dtype=np.int64)
    while m >= 0:
        if n == 0:
            labels[:m + 1] = 0
            break
        step = cm.steps[n, m]
        if step == HORIZONTAL:
            labels[m] = n
            m -= 1
        elif step == DIAGONAL:
            labels[m - mc[n] + 1:m + 1] = n
            m -= mc[n]
            n -= 1
        else:
            raise Infeasible(f"backtrace reached unreachable cell ({n}, {m})")
    return labels


def path_score(logp: np.ndarray, labels: Sequence[int]) -> float:
    """Exactly rounded total log-probability of a labelling."""
    logp = np.asarray(logp)
    return math.fsum(logp[np.arange(len(labels)), np.asarray(labels)].tolist())


def boundaries_from_labels(labels: Sequence[int], chunk_times_s: Sequence[float]) -> list[float]:
    """Midpoints between the last chunk of each surface and the first of the next."""
    labels = np.asarray(labels)
    times = np.asarray(chunk_times_s, dtype=np.float64)
    change = np.flatnonzero(np.diff(labels)) + 1
    return [float((times[i - 1] + times[i]) / 2.0) for i in change]


def segment(probs: ProbMatrix, track: TrackConfig, mc) -> Segmentation:
    mc = _as_min_chunks(mc)
    if probs.logp.shape[1] != track.n:
        raise ValueError(f"probability matrix has {probs.logp.shape[1]} columns, track has {track.n}")
    cm = fill_cost_matrix(probs, mc)
    labels = backtrace(cm, mc)
    return Segmentation(
        chunk_labels=tuple(int(x) for x in labels),
        boundaries_s=tuple(boundaries_from_labels(labels, probs.chunk_times_s)),
        chunk_times_s=tuple(float(t) for t in probs.chunk_times_s),
        total_logp=path_score(probs.logp, labels),
    )


def count_labelings(n_chunks: int, mc) -> int:
    mc = _as_min_chunks(mc)
    slack = n_chunks - mc.total
    if slack < 0:
        return 0
    return math.comb(slack + len(mc) - 1, len(mc) - 1)


def _feasible_starts(n_chunks: int, mc: MinChunks) -> Iterable[tuple[int, ...]]:
    """Start chunk of surfaces 1..N-1 for every feasible monotone labelling."""
    n_surf = len(mc)
    slack = n_chunks - mc.total
    # stars and bars: extra chunks given to each surface beyond its minimum
    for bars in itertools.combinations(range(slack + n_surf - 1), n_surf - 1):
        extra, prev = [], -1
        for b in bars:
            extra.append(b - prev - 1)
            prev = b
        starts, pos = [], 0
        for k in range(n_surf - 1):
            pos += mc[k] + extra[k]
            starts.append(pos)
        yield tuple(starts)


def brute_force_align(probs: ProbMatrix | np.ndarray, mc,
                      limit: int = BRUTE_FORCE_LIMIT) -> tuple[np.ndarray, float]:
    """Exhaustive search over every feasible labelling (verification oracle).

    Ties in total log-probability are broken towards the latest transitions,
    comparing the last boundary first.
    """
    logp = probs.logp if isinstance(probs, ProbMatrix) else np.asarray(probs, dtype=np.float64)
    mc = _as_min_chunks(mc)
    n_chunks, n_surf = logp.shape
    _check_feasible(n_chunks, n_surf, mc)
    count = count_labelings(n_chunks, mc)
    if count > limit:
        raise TooLarge(f"{count} feasible labelings exceed the enumeration limit {limit}")

    rows = logp.tolist()
    best_key, best_starts = None, None
    for starts in _feasible_starts(n_chunks, mc):
        edges = (0, *starts, n_chunks)
        total = math.fsum(rows[m][n] for n in range(n_surf) for m in range(edges[n], edges[n + 1]))
        key = (total, starts[::-1])
        if best_key is None or key > best_key:
            best_key, best_starts = key, starts
    edges = (0, *best_starts, n_chunks)
    labels = np.repeat(np.arange(n_surf), np.diff(edges))
    return labels, best_key[0]


# -- file formats --------------------------------------------------------------

def format_min_chunks(mc: MinChunks, track: TrackConfig) -> str:
    return "label,min_chunks\n" + "".join(f"{l},{c}\n" for l, c in zip(track.surfaces, mc))


def load_min_chunks(path: str | Path, track: TrackConfig) -> MinChunks:
    path = Path(path)
    rows = [r for r in csv.reader(io.StringIO(path.read_text(encoding="utf-8"))) if r]
    if not rows or [c.strip() for c in rows[0]] != ["label", "min_chunks"]:
        raise ConfigError("expected header 'label,min_chunks'", path, 1)
    labels, counts = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ConfigError("expected '<label>,<count>'", path, lineno)
        try:
            c = int(row[1])
        except ValueError:
            raise ConfigError(f"min chunk count {row[1]!r} is not an integer", path, lineno) from None
        if c < 1:
            raise ConfigError(f"min chunk count must be >= 1, got {c}", path, lineno)
        labels.append(row[0].strip())
        counts.append(c)
    if tuple(labels) != track.surfaces:
        raise ConfigError(f"labels {labels} do not match track {list(track.surfaces)}", path)
    return MinChunks(tuple(counts))


def format_segmentation(seg: Segmentation, track: TrackConfig, end_s: float,
                        boundary_only: bool = False) -> str:
    """Segmentation as CSV: one segment per surface from 0 to ``end_s``,
    or ``boundary_index,time_s`` rows when ``boundary_only``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if boundary_only:
        writer.writerow(["boundary_index", "time_s"])
        for i, t in enumerate(seg.boundaries_s):
            writer.writerow([i, f"{t:.6f}"])
        return buf.getvalue()
    writer.writerow(["label", "start_s", "end_s"])
    edges = [0.0, *seg.boundaries_s, end_s]
    for i, label in enumerate(track.surfaces):
        writer.writerow([label, f"{edges[i]:.6f}", f"{edges[i + 1]:.6f}"])
    return buf.getvalue()

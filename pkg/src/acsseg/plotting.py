"""Report figures written next to the CSV/JSON outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .metrics import THRESHOLDS_S, MetricsReport

# fixed metadata keeps repeated renders byte-identical
_PNG_METADATA = {"Software": None}


def _save(fig: Figure, path: str | Path) -> Path:
    FigureCanvasAgg(fig)
    path = Path(path)
    fig.savefig(path, dpi=110, metadata=_PNG_METADATA if path.suffix.lower() == ".png" else None)
    return path


def plot_segmentation(logp: np.ndarray, chunk_times_s: Sequence[float], labels: Sequence[int],
                      surfaces: Sequence[str], boundaries_s: Sequence[float], path: str | Path,
                      truth_boundaries_s: Sequence[float] | None = None,
                      title: str | None = None) -> Path:
    """Chunk probabilities with the aligned labelling and boundaries."""
    times = np.asarray(chunk_times_s, dtype=np.float64)
    probs = np.exp(np.asarray(logp, dtype=np.float64)).T
    n = probs.shape[0]
    fig = Figure(figsize=(10, 5.5))
    ax_p, ax_l = fig.subplots(2, 1, sharex=True, gridspec_kw={"height_ratios": [3, 1]})

    step = times[1] - times[0] if len(times) > 1 else 1.0
    extent = (times[0] - step / 2, times[-1] + step / 2, -0.5, n - 0.5)
    im = ax_p.imshow(probs, aspect="auto", origin="lower", extent=extent,
                     cmap="viridis", vmin=0.0, vmax=1.0, interpolation="nearest")
    fig.colorbar(im, ax=ax_p, label="P(surface | chunk)", pad=0.01)
    ax_p.set_yticks(range(n))
    ax_p.set_yticklabels(surfaces, fontsize=7)
    ax_p.set_ylabel("surface")

    ax_l.step(times, labels, where="mid", color="k", lw=1.2, label="aligned")
    ax_l.plot(times, probs.argmax(axis=0), ".", ms=1.5, color="tab:orange", label="argmax")
    ax_l.set_ylim(-0.5, n - 0.5)
    ax_l.set_ylabel("index")
    ax_l.set_xlabel("time (s)")

    for ax in (ax_p, ax_l):
        for b in boundaries_s:
            ax.axvline(b, color="w" if ax is ax_p else "tab:red", lw=0.9)
        for b in truth_boundaries_s or ():
            ax.axvline(b, color="tab:red", lw=0.9, ls="--")
    ax_l.legend(loc="upper left", fontsize=7, frameon=False)
    if title:
        ax_p.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_boundary_errors(report: MetricsReport, path: str | Path,
                         boundary_names: Sequence[str] | None = None) -> Path:
    errors = np.asarray(report.per_boundary_errors_s, dtype=np.float64)
    fig = Figure(figsize=(7, 3.5))
    ax = fig.subplots()
    x = np.arange(len(errors))
    ax.bar(x, errors, color="tab:blue")
    for th, style in zip(THRESHOLDS_S, (":", "--", "-")):
        ax.axhline(th, color="tab:gray", ls=style, lw=0.8,
                   label=f"{th:g} s (acc {report.barrier_acc.get(th, float('nan')):.2f})")
    if boundary_names is not None:
        ax.set_xticks(x)
        ax.set_xticklabels(boundary_names, rotation=45, ha="right", fontsize=7)
    ax.set_xlabel("boundary")
    ax.set_ylabel("|error| (s)")
    ax.set_title(f"mean error {report.mean_error_s:.3f} s")
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return _save(fig, path)

import numpy as np
import pytest

from acsseg.align import MinChunks
from acsseg.classify import ProbMatrix
from acsseg.core import AudioClip, SegmentAnnotation, TrackConfig

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def write_track(tmp_path):
    def _write(text, name="track.cfg"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p
    return _write


@pytest.fixture
def ab_track():
    return TrackConfig(("A", "B"), (0.0, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tone(freq, seconds, sr=22050, amp=0.5):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioClip(amp * np.sin(2 * np.pi * freq * t), sr)


def annotation(*segments):
    return SegmentAnnotation(tuple(segments))


def random_instance(r, n_max=4, m_max=12, n_min=1):
    """Random row-normalized log-probs plus feasible min chunks (sum <= M)."""
    n = int(r.integers(n_min, n_max + 1))
    m = int(r.integers(n, m_max + 1))
    logits = r.normal(scale=2.0, size=(m, n))
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    # random composition of a total <= m into n positive parts
    total = int(r.integers(n, m + 1))
    cuts = np.sort(r.choice(np.arange(1, total), size=n - 1, replace=False)) if n > 1 else []
    mc = np.diff(np.concatenate([[0], cuts, [total]])).astype(int)
    return ProbMatrix(logp, np.arange(m) * 0.1), MinChunks(tuple(int(c) for c in mc))

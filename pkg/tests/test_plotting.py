import numpy as np

from acsseg import metrics, plotting

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_segmentation_plot_deterministic(tmp_path):
    logp = np.log(np.array([[0.9, 0.1], [0.7, 0.3], [0.2, 0.8], [0.1, 0.9]]))
    args = (logp, [0.0, 0.1, 0.2, 0.3], [0, 0, 1, 1], ["A", "B"], [0.15])
    a = plotting.plot_segmentation(*args, tmp_path / "a.png", truth_boundaries_s=[0.14], title="t")
    b = plotting.plot_segmentation(*args, tmp_path / "b.png", truth_boundaries_s=[0.14], title="t")
    assert a.read_bytes()[:8] == PNG_MAGIC
    assert a.read_bytes() == b.read_bytes()


def test_boundary_error_plot(tmp_path):
    rep = metrics.boundary_metrics([1.0, 5.0, 9.0], [1.1, 4.3, 9.0])
    out = plotting.plot_boundary_errors(rep, tmp_path / "e.svg", ["a|b", "b|c", "c|d"])
    assert out.exists() and b"<svg" in out.read_bytes()[:500]


def test_boundary_error_plot_no_boundaries(tmp_path):
    rep = metrics.boundary_metrics([], [])
    assert plotting.plot_boundary_errors(rep, tmp_path / "e.png").exists()

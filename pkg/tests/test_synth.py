import numpy as np
import pytest

from acsseg import classify, dsp, synth
from acsseg.core import ChunkConfig, SpectrogramConfig, TrackConfig, load_annotation, validate_annotation


@pytest.fixture
def ab():
    return TrackConfig(("A", "B"), (0.0, 0.0))


def test_same_seed_identical(ab):
    spec = synth.SynthSpec(ab, seed=42, duration_range_s=((3, 4), (2, 5)))
    c1, a1 = synth.generate_run(spec)
    c2, a2 = synth.generate_run(spec)
    assert np.array_equal(c1.samples, c2.samples)
    assert a1 == a2
    c3, _ = synth.generate_run(synth.with_seed(spec, 43))
    assert not np.array_equal(c1.samples[:1000], c3.samples[:1000])


def test_fixed_durations(ab):
    clip, ann = synth.generate_run(synth.SynthSpec(ab, duration_range_s=((3, 3), (5, 5))))
    assert [(s.label, s.start_s, s.end_s) for s in ann.segments] == [("A", 0.0, 3.0), ("B", 3.0, 8.0)]
    assert len(clip.samples) == 8 * 22050
    assert np.max(np.abs(clip.samples)) <= 1.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_valid_annotation_and_total_duration(seed):
    track = synth.default_track(5)
    spec = synth.SynthSpec(track, seed=seed, duration_range_s=((1, 2),) * 5)
    clip, ann = synth.generate_run(spec)
    validate_annotation(ann, track)
    for d, (lo, hi) in zip(ann.durations(), spec.duration_range_s):
        assert lo - 1 / 22050 <= d <= hi + 1 / 22050
    assert abs(clip.duration_s - sum(ann.durations())) <= 1 / clip.sample_rate


def test_spec_validation(ab):
    with pytest.raises(ValueError):
        synth.SynthSpec(ab, duration_range_s=((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        synth.SynthSpec(ab, center_freqs_hz=(100.0, 20000.0))
    with pytest.raises(ValueError):
        synth.SynthSpec(TrackConfig(("A", "B"), (5.0, 0.0)), duration_range_s=((3, 4), (1, 2)))
    with pytest.raises(ValueError):
        synth.SynthSpec(ab, amplitude_jitter=1.0)


def test_default_synth_settings():
    spec = synth.SynthSpec(synth.default_track(6))
    assert spec.center_freqs_hz[0] == pytest.approx(200.0)
    assert spec.center_freqs_hz[-1] == pytest.approx(0.8 * 11025)
    assert all(lo >= 0 for lo, _ in spec.duration_range_s)


def test_dominant_mel_band_in_surface_passband():
    # oracle: per-frame argmax over the dsp module's mel output; a frame matches
    # when that band's center lies inside its surface's pass band
    spec = synth.SynthSpec(synth.default_track(6), seed=5)
    clip, ann = synth.generate_run(spec)
    cfg = SpectrogramConfig()
    fm = dsp.spectrogram(clip, cfg)
    centers = dsp.mel_center_freqs(clip.sample_rate, cfg.n_mels)
    starts = np.arange(fm.n_frames) * fm.frame_hop_s
    ends = starts + cfg.n_fft / clip.sample_rate
    half = spec.bandwidth_octaves / 2
    hits = total = 0
    for k, seg in enumerate(ann.segments):
        inside = (starts >= seg.start_s) & (ends <= seg.end_s)
        band = centers[fm.data[inside].argmax(axis=1)]
        fc = spec.center_freqs_hz[k]
        hits += np.count_nonzero((band >= fc * 2 ** -half) & (band <= fc * 2 ** half))
        total += np.count_nonzero(inside)
    assert hits / total >= 0.95


def test_dataset_files(tmp_path):
    spec = synth.SynthSpec(synth.default_track(2), seed=3, duration_range_s=((1, 1.5),) * 2)
    manifest = synth.generate_dataset(spec, 10, tmp_path / "d")
    lines = manifest.read_text().splitlines()
    assert lines[0] == "wav_path,annotation_path" and len(lines) == 11
    pairs = synth.read_manifest(manifest)
    assert len(pairs) == 10 and all(w.exists() and a.exists() for w, a in pairs)
    # run i is generate_run at seed + i
    clip, ann = synth.generate_run(synth.with_seed(spec, 3 + 4))
    loaded = dsp.load_wav(pairs[4][0])
    assert np.allclose(loaded.samples, clip.samples, atol=1 / 32767)
    assert load_annotation(pairs[4][1]) == ann

    again = synth.generate_dataset(spec, 10, tmp_path / "e")
    for name in ["manifest.csv", *(f"run_{i}.{ext}" for i in range(10) for ext in ("wav", "csv"))]:
        assert (tmp_path / "d" / name).read_bytes() == (again.parent / name).read_bytes()


def test_dataset_zero_runs(tmp_path):
    spec = synth.SynthSpec(synth.default_track(2))
    manifest = synth.generate_dataset(spec, 0, tmp_path)
    assert manifest.read_text() == "wav_path,annotation_path\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.csv"]
    assert synth.read_manifest(manifest) == []


def test_default_track_labels():
    assert synth.default_track(4).surfaces == ("pre", "s1", "s2", "post")
    assert synth.default_track(1).surfaces == ("track",)


@pytest.mark.slow
def test_distinguishability_default_settings():
    track = synth.default_track(6)
    spec = synth.SynthSpec(track, seed=11)
    cfg, cc = SpectrogramConfig(), ChunkConfig()
    sets = []
    for i in range(10):
        clip, ann = synth.generate_run(synth.with_seed(spec, 11 + i))
        sets.append(dsp.extract_chunks(dsp.spectrogram(dsp.normalize(clip), cfg), cc, ann, track))
    model = classify.train_centroid(sets[:5], track.n)
    pred = np.concatenate([classify.predict(model, cs).logp.argmax(axis=1) for cs in sets[5:]])
    truth = np.concatenate([cs.labels for cs in sets[5:]])
    assert np.mean(pred == truth) >= 0.95

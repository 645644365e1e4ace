"""Command-line entry point.

Exit codes: 0 ok, 1 I/O failure, 2 usage or validation error,
3 infeasible alignment.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import align, classify, core, dsp, metrics, synth
from .core import AcsError, ChunkConfig, Infeasible, SpectrogramConfig

log = logging.getLogger("acsseg")

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _add_feature_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("features")
    g.add_argument("--n-fft", type=int, default=4096)
    g.add_argument("--hop-length", type=int, default=None, help="default: n_fft / 2")
    g.add_argument("--feature", choices=core.FEATURE_KINDS, default="mel")
    g.add_argument("--n-mels", type=int, default=70)
    g.add_argument("--n-mfcc", type=int, default=40)
    g.add_argument("--db-floor", type=float, default=-80.0)


def _add_chunk_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("chunks")
    g.add_argument("--chunk-size", type=int, default=91)
    g.add_argument("--chunk-hop", type=int, default=1)


def _spec_config(args) -> SpectrogramConfig:
    try:
        return SpectrogramConfig(n_fft=args.n_fft, hop_length=args.hop_length, feature=args.feature,
                                 n_mels=args.n_mels, n_mfcc=args.n_mfcc, db_floor=args.db_floor)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _chunk_config(args) -> ChunkConfig:
    try:
        return ChunkConfig(args.chunk_size, args.chunk_hop)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _features(wav: Path, cfg: SpectrogramConfig) -> tuple[core.AudioClip, dsp.FeatureMatrix]:
    clip = dsp.normalize(dsp.load_wav(wav))
    return clip, dsp.spectrogram(clip, cfg)


def _labelled_chunks(job):
    wav, ann_path, track, cfg, cc = job
    ann = core.validate_annotation(core.load_annotation(ann_path), track)
    _, fm = _features(wav, cfg)
    return dsp.extract_chunks(fm, cc, ann, track)


def _map(fn, jobs, n_jobs: int):
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _write(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


# -- commands --------------------------------------------------------------------

def cmd_synth(args) -> int:
    track = core.load_track_config(args.surfaces)
    if args.runs < 0:
        raise UsageError("--runs must be >= 0")
    try:
        spec = synth.SynthSpec(track, sample_rate=args.sample_rate, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    manifest = synth.generate_dataset(spec, args.runs, args.out_dir)
    print(manifest)
    return EXIT_OK


def cmd_min_durations(args) -> int:
    track = core.load_track_config(args.track)
    pairs = synth.read_manifest(args.manifest)
    if not pairs:
        raise UsageError(f"manifest {args.manifest} lists no runs")
    anns = [core.load_annotation(a) for _, a in pairs]
    try:
        mc = align.min_chunks_from_annotations(anns, track, args.chunk_hop_s, args.edge_offset_s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write(args.out, align.format_min_chunks(mc, track))
    return EXIT_OK


def cmd_train_centroid(args) -> int:
    track = core.load_track_config(args.track)
    cfg, cc = _spec_config(args), _chunk_config(args)
    pairs = synth.read_manifest(args.manifest)
    if not pairs:
        raise UsageError(f"manifest {args.manifest} lists no runs")
    sets = _map(_labelled_chunks, [(w, a, track, cfg, cc) for w, a in pairs], args.jobs)
    try:
        model = classify.train_centroid(sets, track.n, args.temperature, track.surfaces)
    except classify.MissingClass as exc:
        raise UsageError(str(exc)) from None
    classify.save_model(model, args.out)
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _spec_config(args)
    _, fm = _features(Path(args.wav), cfg)
    dsp.save_features(fm, args.out)
    log.info("%d frames x %d bins", fm.n_frames, fm.n_bins)
    return EXIT_OK


def cmd_segment(args) -> int:
    track = core.load_track_config(args.track)
    mc = align.load_min_chunks(args.min_chunks, track)
    cfg, cc = _spec_config(args), _chunk_config(args)
    clip, fm = _features(Path(args.wav), cfg)
    cs = dsp.extract_chunks(fm, cc)
    if args.model:
        model = classify.load_model(args.model, track)
        probs = classify.predict(model, cs)
    else:
        probs = classify.import_probs(args.probs, track, cs.center_times_s)
    try:
        seg = align.segment(probs, track, mc)
    except Infeasible as exc:
        if mc.total <= probs.shape[0]:
            exc = Infeasible(f"{exc} (sum of min chunks {mc.total}, M={probs.shape[0]})")
        raise exc from None
    _write(args.out, align.format_segmentation(seg, track, clip.duration_s, args.boundaries_only))
    if args.probs_out:
        _write(args.probs_out, classify.format_probs(probs, track))
    if args.plot:
        from .plotting import plot_segmentation
        plot_segmentation(probs.logp, probs.chunk_times_s, seg.chunk_labels, track.surfaces,
                          seg.boundaries_s, args.plot, title=Path(args.wav).name)
    return EXIT_OK


def _load_segments(path: Path) -> core.SegmentAnnotation:
    text = path.read_text(encoding="utf-8")
    if text.startswith("boundary_index"):
        raise UsageError(f"{path}: eval needs the 'label,start_s,end_s' segmentation format")
    return core.parse_annotation(text, path)


def cmd_eval(args) -> int:
    truth = _load_segments(Path(args.truth))
    pred = _load_segments(Path(args.pred))
    track = (core.load_track_config(args.track) if args.track
             else core.TrackConfig(tuple(truth.labels), (0.0,) * len(truth.segments)))
    for ann in (truth, pred):
        core.validate_annotation(ann, track)
    report = metrics.boundary_metrics(pred, truth)

    cfg, cc = _spec_config(args), _chunk_config(args)
    if args.wav:
        clip = dsp.load_wav(args.wav)
        n_samples, sr = len(clip.samples), clip.sample_rate
    else:
        sr = args.sample_rate
        n_samples = int(round(truth.end_s * sr))
    m = dsp.n_chunks_for(dsp.n_frames_for(n_samples, cfg.n_fft, cfg.hop_length), cc)
    if m > 0:
        times = dsp.chunk_center_times(m, cc, cfg.hop_length / sr, (cfg.n_fft / 2) / sr)
        times = times[(times >= max(truth.start_s, pred.start_s)) & (times < min(truth.end_s, pred.end_s))]
        if len(times):
            report.chunk_accuracy, report.chunk_f1_macro = metrics.chunk_metrics(
                core.labels_at_times(pred, track, times), core.labels_at_times(truth, track, times),
                track.n)
    _write(args.out, report.to_json())
    if args.plot:
        from .plotting import plot_boundary_errors
        names = [f"{a}|{b}" for a, b in zip(track.surfaces, track.surfaces[1:])]
        plot_boundary_errors(report, args.plot, names)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acsseg", description=(
        "Constrained segmentation of track-run recordings: spectrogram chunks -> "
        "surface probabilities -> ACS-DTW alignment -> boundary timestamps."))
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--surfaces", required=True, help="track config file")
    p.add_argument("--sample-rate", type=int, default=22050)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("min-durations", help="minimum chunks per surface from annotations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--track", required=True)
    p.add_argument("--chunk-hop-s", type=float, required=True)
    p.add_argument("--edge-offset-s", type=float, default=0.0,
                   help="subtracted from first/last surface durations (first chunk center time)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_min_durations)

    p = sub.add_parser("train-centroid", help="train the built-in centroid classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--track", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1)
    _add_feature_args(p)
    _add_chunk_args(p)
    p.set_defaults(func=cmd_train_centroid)

    p = sub.add_parser("features", help="dump a feature matrix (ACSF binary)")
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    _add_feature_args(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("segment", help="segment one recording")
    p.add_argument("--wav", required=True)
    p.add_argument("--track", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="centroid model file")
    src.add_argument("--probs", help="probability CSV")
    p.add_argument("--min-chunks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--boundaries-only", action="store_true",
                   help="write 'boundary_index,time_s' rows instead of segments")
    p.add_argument("--probs-out", help="also write the chunk probabilities as CSV")
    p.add_argument("--plot", help="render a segmentation figure (png/pdf/svg)")
    _add_feature_args(p)
    _add_chunk_args(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="compare a segmentation with ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--track", help="track config (default: truth label order)")
    p.add_argument("--wav", help="recording, for exact chunk timing")
    p.add_argument("--sample-rate", type=int, default=22050)
    p.add_argument("--plot", help="render a boundary error figure")
    _add_feature_args(p)
    _add_chunk_args(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"error: infeasible alignment: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, AcsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Acoustic constrained segmentation of recordings with a fixed surface order."""

from .align import (CostMatrix, MinChunks, backtrace, brute_force_align, fill_cost_matrix,
                    min_chunks_from_annotations, segment)
from .classify import (CentroidModel, ProbMatrix, chunk_features, import_probs, predict,
                       train_centroid)
from .core import (AudioClip, ChunkConfig, SegmentAnnotation, Segmentation, SpectrogramConfig,
                   TrackConfig, load_track_config, validate_annotation)
from .dsp import ChunkSet, FeatureMatrix, extract_chunks, load_wav, normalize, spectrogram
from .metrics import MetricsReport, boundary_metrics, chunk_metrics
from .synth import SynthSpec, generate_dataset, generate_run

__version__ = "0.1.0"

from avemo.preprocessing.audio import MelConfig, compute_log_mel, read_wav, write_wav
from avemo.preprocessing.cache import FeatureCache, preprocess_utterance
from avemo.preprocessing.synthetic import generate_synthetic_corpus, pitch_for_label
from avemo.preprocessing.video import (
    FaceCropSequence,
    FaceDetector,
    NullFaceDetector,
    VideoConfig,
    crop_face,
    crop_sequence,
    load_frames,
    sample_frames,
)

__all__ = [
    "FaceCropSequence",
    "FaceDetector",
    "FeatureCache",
    "MelConfig",
    "NullFaceDetector",
    "VideoConfig",
    "compute_log_mel",
    "crop_face",
    "crop_sequence",
    "generate_synthetic_corpus",
    "load_frames",
    "pitch_for_label",
    "preprocess_utterance",
    "read_wav",
    "sample_frames",
    "write_wav",
]

from avemo.encoders.common import is_trainable, param_checksum, set_trainable, sinusoidal_positions
from avemo.encoders.face import (
    FaceEncoder,
    FaceEncoderConfig,
    LearnableQueries,
    TemporalPooler,
    TinyFrameEncoder,
    temporal_pool,
)
from avemo.encoders.speech import SpeechEncoderConfig, TinySpeechEncoder, encode_speech

__all__ = [
    "FaceEncoder",
    "FaceEncoderConfig",
    "LearnableQueries",
    "SpeechEncoderConfig",
    "TemporalPooler",
    "TinyFrameEncoder",
    "TinySpeechEncoder",
    "encode_speech",
    "is_trainable",
    "param_checksum",
    "set_trainable",
    "sinusoidal_positions",
    "temporal_pool",
]

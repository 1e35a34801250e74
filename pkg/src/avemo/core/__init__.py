from avemo.core.manifest import DatasetManifest, ManifestRecord, validate_manifest
from avemo.core.records import AI, USER, Dialogue, SpeakerMetadata, UtteranceRecord, split_rounds
from avemo.core.vocab import DEFAULT_LABELS, EmotionVocabulary

__all__ = [
    "AI",
    "USER",
    "DEFAULT_LABELS",
    "DatasetManifest",
    "Dialogue",
    "EmotionVocabulary",
    "ManifestRecord",
    "SpeakerMetadata",
    "UtteranceRecord",
    "split_rounds",
    "validate_manifest",
]

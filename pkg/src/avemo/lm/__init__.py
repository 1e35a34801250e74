from avemo.lm.decoder import CausalDecoder, DecoderConfig
from avemo.lm.lora import (
    LoraAdapter,
    LoraConfig,
    LoRALinear,
    attach_lora,
    bias_and_norm_parameters,
    detach_lora,
    lora_apply,
    lora_merge,
    lora_parameters,
    merge_lora,
)
from avemo.lm.model import DecodeConfig, DialogueModel
from avemo.lm.sequence import (
    AUDIO,
    VISUAL,
    FeatureSegment,
    MixedSequence,
    TextSegment,
    assemble_input,
    feature_span,
)
from avemo.lm.tokenizer import SPECIAL_TOKENS, ByteTokenizer

__all__ = [
    "AUDIO",
    "VISUAL",
    "ByteTokenizer",
    "CausalDecoder",
    "DecodeConfig",
    "DecoderConfig",
    "DialogueModel",
    "FeatureSegment",
    "LoRALinear",
    "LoraAdapter",
    "LoraConfig",
    "MixedSequence",
    "SPECIAL_TOKENS",
    "TextSegment",
    "assemble_input",
    "attach_lora",
    "bias_and_norm_parameters",
    "detach_lora",
    "feature_span",
    "lora_apply",
    "lora_merge",
    "lora_parameters",
    "merge_lora",
]

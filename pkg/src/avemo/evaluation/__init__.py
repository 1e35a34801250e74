from avemo.evaluation.harness import (
    DecoderTextScorer,
    EvalConfig,
    MetricReport,
    evaluate_corpus,
    generate_turns,
)
from avemo.evaluation.probes import stage1_emotion_accuracy, stage2_emotion_accuracy
from avemo.evaluation.emotion import LexiconEmotionEmbedder, cosine_with_flag, emotion_similarity
from avemo.evaluation.kernels import BACKEND
from avemo.evaluation.metrics import UniformScorer, bleu_n, distinct_1, meteor, perplexity, rouge_l
from avemo.evaluation.text_tokenizer import METRIC_TOKENIZER_VERSION, tokenize

__all__ = [
    "DecoderTextScorer",
    "EvalConfig",
    "MetricReport",
    "evaluate_corpus",
    "generate_turns",
    "stage1_emotion_accuracy",
    "stage2_emotion_accuracy",
    "BACKEND",
    "LexiconEmotionEmbedder",
    "METRIC_TOKENIZER_VERSION",
    "UniformScorer",
    "bleu_n",
    "cosine_with_flag",
    "distinct_1",
    "emotion_similarity",
    "meteor",
    "perplexity",
    "rouge_l",
    "tokenize",
]

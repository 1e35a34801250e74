import random
import string

import pytest

from avemo.core import EmotionVocabulary, SpeakerMetadata
from avemo.errors import ParseError, UnknownEmotion
from avemo.lm import ByteTokenizer
from avemo.prompts import (
    PROMPT_SET_HASH,
    build_stage1_prompt,
    build_stage2_prompt,
    build_stage3_prompt,
    format_ai_target,
    parse_ai_output,
    render_metadata,
)

VOCAB = EmotionVocabulary()
TOK = ByteTokenizer()


class TestRenderMetadata:
    def test_empty(self):
        assert render_metadata(SpeakerMetadata()) == ""

    def test_emotion_with_intensity(self):
        md = SpeakerMetadata(emotion="happy", emotion_intensity="high")
        assert render_metadata(md) == "emotion: happy (intensity: high)"

    def test_age_only(self):
        assert render_metadata(SpeakerMetadata(age=34)) == "age: 34"

    def test_monotonic_growth(self):
        fields = [
            ("emotion", "sad"),
            ("emotion_intensity", "low"),
            ("emotion_description", "a slow frown"),
            ("gender", "female"),
            ("age", 40),
            ("ethnicity", "hispanic"),
        ]
        current = {}
        previous_values: list[str] = []
        for name, value in fields:
            current[name] = value
            text = render_metadata(SpeakerMetadata(**current))
            for prior in previous_values:
                assert prior in text
            previous_values.append(str(value))

    def test_exclude_emotion(self):
        md = SpeakerMetadata(emotion="sad", emotion_intensity="low", age=30)
        assert render_metadata(md, include_emotion=False) == "age: 30"


class TestStagePrompts:
    def test_stage1_tasks_differ(self):
        asr = build_stage1_prompt("asr")
        both = build_stage1_prompt("asr+ser")
        assert asr.system_text != both.system_text
        assert "emotion" in both.system_text
        assert "emotion" not in asr.system_text

    def test_stage2_tasks_differ(self):
        emr = build_stage2_prompt("emr")
        both = build_stage2_prompt("emr+emd")
        assert emr.system_text != both.system_text
        assert "describe" in both.system_text

    def test_stage3_exists(self):
        assert build_stage3_prompt().system_text

    def test_determinism(self):
        assert build_stage1_prompt("asr") == build_stage1_prompt("asr")
        assert len(PROMPT_SET_HASH) == 64

    def test_bad_task_rejected(self):
        with pytest.raises(ValueError):
            build_stage1_prompt("ser")


class TestReplyGrammar:
    def test_format_basic(self):
        ids = format_ai_target(TOK, "happy", "Glad to hear!", VOCAB)
        parsed = parse_ai_output(TOK, ids, VOCAB, mode="strict")
        assert parsed.emotion == "happy"
        assert parsed.text == "Glad to hear!"
        assert not parsed.warning

    def test_unknown_emotion(self):
        with pytest.raises(UnknownEmotion):
            format_ai_target(TOK, "joyful", "x", VOCAB)

    def test_untagged_lenient(self):
        ids = TOK.encode("Hello.")
        parsed = parse_ai_output(TOK, ids, VOCAB, mode="lenient")
        assert parsed == parsed.__class__("neutral", "Hello.", True)

    def test_untagged_strict(self):
        with pytest.raises(ParseError):
            parse_ai_output(TOK, TOK.encode("Hello."), VOCAB, mode="strict")

    def test_roundtrip_property(self):
        rng = random.Random(2024)
        printable = string.ascii_letters + string.digits + " .,!?'éü"
        for _ in range(1000):
            emotion = rng.choice(VOCAB.labels)
            text = "".join(rng.choice(printable) for _ in range(rng.randint(1, 40)))
            ids = format_ai_target(TOK, emotion, text, VOCAB)
            parsed = parse_ai_output(TOK, ids, VOCAB, mode="strict")
            assert (parsed.emotion, parsed.text, parsed.warning) == (emotion, text, False)

    def test_garbled_tag_lenient_fallback(self):
        ids = [TOK.token("emo_begin")] + TOK.encode("joyful") + [TOK.token("emo_end")] + TOK.encode("hi")
        parsed = parse_ai_output(TOK, ids, VOCAB, mode="lenient")
        assert parsed.emotion == "neutral"
        assert parsed.warning

import json

import pytest

from avemo.core import (
    Dialogue,
    EmotionVocabulary,
    SpeakerMetadata,
    UtteranceRecord,
    split_rounds,
    validate_manifest,
)
from avemo.core.manifest import FORMAT_NAME, FORMAT_VERSION, DatasetManifest, ManifestRecord
from avemo.errors import InvariantViolation, MalformedManifest, MissingMedia, UnknownEmotion


def user_turn(transcript="hello there", emotion="happy", audio="a.wav", video=None, **kw):
    return UtteranceRecord(
        speaker="user", transcript=transcript, emotion=emotion, audio_ref=audio, video_ref=video, **kw
    )


def ai_turn(transcript="hi!", emotion="neutral"):
    return UtteranceRecord(speaker="ai", transcript=transcript, emotion=emotion)


def make_dialogue(rounds=2, dialogue_id="d0"):
    turns = []
    for _ in range(rounds):
        turns.append(user_turn())
        turns.append(ai_turn())
    return Dialogue(dialogue_id=dialogue_id, turns=tuple(turns))


class TestVocabulary:
    def test_default_set(self):
        vocab = EmotionVocabulary()
        assert vocab.labels == ("happy", "sad", "surprised", "fearful", "disgusted", "angry", "neutral")
        assert vocab.default_label == "neutral"

    def test_rejects_duplicate(self):
        with pytest.raises(InvariantViolation):
            EmotionVocabulary(labels=("happy", "happy"), default_label="happy")

    def test_rejects_missing_default(self):
        with pytest.raises(InvariantViolation):
            EmotionVocabulary(labels=("happy",), default_label="sad")

    def test_custom_vocab_with_calm(self):
        vocab = EmotionVocabulary(labels=EmotionVocabulary().labels + ("calm",))
        assert "calm" in vocab

    def test_require_unknown(self):
        with pytest.raises(UnknownEmotion):
            EmotionVocabulary().require("joyful")

    def test_coerce_lenient(self):
        label, fallback = EmotionVocabulary().coerce("joyful", strict=False)
        assert label == "neutral" and fallback


class TestRecords:
    def test_ai_turn_never_carries_media(self):
        with pytest.raises(InvariantViolation):
            UtteranceRecord(speaker="ai", transcript="x", emotion="neutral", audio_ref="a.wav")

    def test_metadata_roundtrip(self):
        md = SpeakerMetadata(emotion="happy", emotion_intensity="high", age=34)
        assert SpeakerMetadata.from_dict(md.to_dict()) == md

    def test_metadata_rejects_bad_intensity(self):
        with pytest.raises(InvariantViolation):
            SpeakerMetadata(emotion_intensity="extreme")

    def test_dialogue_rejects_ai_first(self):
        with pytest.raises(InvariantViolation):
            Dialogue(dialogue_id="d", turns=(ai_turn(), user_turn()))

    def test_dialogue_rejects_odd_length(self):
        with pytest.raises(InvariantViolation):
            Dialogue(dialogue_id="d", turns=(user_turn(), ai_turn(), user_turn()))

    def test_dialogue_rejects_same_speaker_twice(self):
        with pytest.raises(InvariantViolation):
            Dialogue(dialogue_id="d", turns=(user_turn(), user_turn()))


class TestSplitRounds:
    def test_single_round(self):
        triples = split_rounds(make_dialogue(rounds=1))
        assert len(triples) == 1
        assert triples[0][0] == ()

    def test_three_rounds_history_lengths(self):
        triples = split_rounds(make_dialogue(rounds=3))
        assert [len(h) for h, _, _ in triples] == [0, 2, 4]

    def test_last_triple_reconstructs_dialogue(self):
        d = make_dialogue(rounds=4)
        history, user, ai = split_rounds(d)[-1]
        assert tuple(history) + (user, ai) == d.turns


def write_manifest(tmp_path, records, split="train", header=None):
    path = tmp_path / "manifest.jsonl"
    lines = [json.dumps(header or {"format": FORMAT_NAME, "version": FORMAT_VERSION, "split": split})]
    lines += [json.dumps(r) for r in records]
    path.write_text("\n".join(lines) + "\n")
    return path


def dialogue_record(tmp_path, tags=("dialogue",), rounds=1, with_video=False, description=None):
    (tmp_path / "a.wav").write_bytes(b"fake")
    video = None
    if with_video:
        (tmp_path / "v").mkdir(exist_ok=True)
        (tmp_path / "v" / "0.png").write_bytes(b"fake")
        video = "v"
    turns = []
    for _ in range(rounds):
        turns.append(
            user_turn(video=video, facial_description=description).to_dict()
        )
        turns.append(ai_turn().to_dict())
    return {
        "kind": "dialogue",
        "task_tags": list(tags),
        "dialogue": {"dialogue_id": "d0", "turns": turns},
    }


class TestValidateManifest:
    def test_wellformed_two_dialogues(self, tmp_path):
        rec = dialogue_record(tmp_path)
        rec2 = dict(rec, dialogue={"dialogue_id": "d1", "turns": rec["dialogue"]["turns"]})
        manifest = validate_manifest(write_manifest(tmp_path, [rec, rec2]))
        assert len(manifest.dialogues()) == 2

    def test_emd_without_description_rejected(self, tmp_path):
        rec = dialogue_record(tmp_path, tags=("emd",), with_video=True)
        with pytest.raises(InvariantViolation) as err:
            validate_manifest(write_manifest(tmp_path, [rec]))
        assert err.value.field == "facial_description"

    def test_emd_with_description_accepted(self, tmp_path):
        rec = dialogue_record(tmp_path, tags=("emd",), with_video=True, description="A slow smile. Eyes widen.")
        manifest = validate_manifest(write_manifest(tmp_path, [rec]))
        assert len(manifest.records) == 1

    def test_ai_first_dialogue_rejected(self, tmp_path):
        rec = dialogue_record(tmp_path)
        rec["dialogue"]["turns"] = rec["dialogue"]["turns"][::-1]
        with pytest.raises(InvariantViolation):
            validate_manifest(write_manifest(tmp_path, [rec]))

    def test_missing_media(self, tmp_path):
        rec = dialogue_record(tmp_path)
        (tmp_path / "a.wav").unlink()
        with pytest.raises(MissingMedia):
            validate_manifest(write_manifest(tmp_path, [rec]))

    def test_syntax_error(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"format": "avemo-manifest", "version": 1, "split": "train"}\n{nope}\n')
        with pytest.raises(MalformedManifest):
            validate_manifest(path)

    def test_wrong_header(self, tmp_path):
        path = write_manifest(tmp_path, [], header={"format": "other", "version": 1, "split": "train"})
        with pytest.raises(MalformedManifest):
            validate_manifest(path)

    def test_unknown_emotion_strict_vs_lenient(self, tmp_path):
        rec = dialogue_record(tmp_path)
        rec["dialogue"]["turns"][0]["emotion"] = "joyful"
        path = write_manifest(tmp_path, [rec])
        with pytest.raises(InvariantViolation):
            validate_manifest(path)
        manifest = validate_manifest(path, strict_emotions=False)
        assert manifest.records[0].dialogue.turns[0].emotion == "neutral"

    def test_revalidation_is_idempotent(self, tmp_path):
        rec = dialogue_record(tmp_path, tags=("dialogue", "asr"))
        manifest = validate_manifest(write_manifest(tmp_path, [rec]))
        saved = manifest.save(tmp_path / "again.jsonl")
        again = validate_manifest(saved)
        assert again.records == manifest.records
        assert again.split == manifest.split

"""Dataset manifests: a JSON-lines file of dialogues and tagged utterances.

Layout (documented field-by-field in ``docs/manifest-format.md``):

* line 1 is a header object: ``{"format": "avemo-manifest", "version": 1,
  "split": "train"}``
* every following line is one record, either
  ``{"kind": "dialogue", "task_tags": [...], "dialogue": {...}}`` or
  ``{"kind": "utterance", "task_tags": [...], "utterance": {...}}``

Media paths are relative to the manifest's directory. One record per
line keeps the file streamable, diffable, and append-friendly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from avemo.core.records import USER, Dialogue, UtteranceRecord
from avemo.core.vocab import EmotionVocabulary
from avemo.errors import InvariantViolation, MalformedManifest, MissingMedia

log = logging.getLogger(__name__)

FORMAT_NAME = "avemo-manifest"
FORMAT_VERSION = 1
SPLITS = ("train", "valid", "test")
TASK_TAGS = ("asr", "ser", "emr", "emd", "dialogue")


@dataclass(frozen=True)
class ManifestRecord:
    kind: str  # "dialogue" | "utterance"
    task_tags: tuple[str, ...]
    dialogue: Dialogue | None = None
    utterance: UtteranceRecord | None = None

    def user_turns(self) -> list[UtteranceRecord]:
        if self.kind == "dialogue":
            return [t for t in self.dialogue.turns if t.speaker == USER]
        return [self.utterance]

    def all_turns(self) -> list[UtteranceRecord]:
        if self.kind == "dialogue":
            return list(self.dialogue.turns)
        return [self.utterance]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "task_tags": list(self.task_tags)}
        if self.kind == "dialogue":
            out["dialogue"] = self.dialogue.to_dict()
        else:
            out["utterance"] = self.utterance.to_dict()
        return out


@dataclass(frozen=True)
class DatasetManifest:
    split: str
    records: tuple[ManifestRecord, ...]
    base_dir: Path

    def dialogues(self, tag: str | None = None) -> list[Dialogue]:
        out = []
        for rec in self.records:
            if rec.kind != "dialogue":
                continue
            if tag is not None and tag not in rec.task_tags:
                continue
            out.append(rec.dialogue)
        return out

    def tagged(self, tag: str) -> list[ManifestRecord]:
        return [rec for rec in self.records if tag in rec.task_tags]

    def resolve(self, ref: str) -> Path:
        return self.base_dir / ref

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "split": self.split}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header) + "\n")
            for rec in self.records:
                fh.write(json.dumps(rec.to_dict()) + "\n")
        return path


def _check_tags(tags, index):
    for tag in tags:
        if tag not in TASK_TAGS:
            raise InvariantViolation(f"unknown task tag {tag!r}", record_index=index, field="task_tags")


def _check_record(rec: ManifestRecord, index: int, vocab: EmotionVocabulary, strict_emotions: bool):
    """Apply per-record invariants; returns a possibly label-coerced record."""
    _check_tags(rec.task_tags, index)
    coerced_turns = {}
    for turn in rec.all_turns():
        if turn.emotion not in vocab:
            if strict_emotions:
                raise InvariantViolation(
                    f"emotion {turn.emotion!r} not in vocabulary",
                    record_index=index,
                    field="emotion",
                )
            log.warning(
                "record %d: unknown emotion %r mapped to %r", index, turn.emotion, vocab.default_label
            )
            coerced_turns[id(turn)] = replace(turn, emotion=vocab.default_label)

    if coerced_turns:
        if rec.kind == "dialogue":
            turns = tuple(coerced_turns.get(id(t), t) for t in rec.dialogue.turns)
            rec = replace(rec, dialogue=replace(rec.dialogue, turns=turns))
        else:
            rec = replace(rec, utterance=coerced_turns[id(rec.utterance)])

    tags = set(rec.task_tags)
    for turn in rec.user_turns():
        if tags & {"asr", "ser", "dialogue"} and not turn.audio_ref:
            raise InvariantViolation(
                "record tagged asr/ser/dialogue requires audio_ref on user turns",
                record_index=index,
                field="audio_ref",
            )
        if tags & {"emr", "emd"} and not turn.video_ref:
            raise InvariantViolation(
                "record tagged emr/emd requires video_ref", record_index=index, field="video_ref"
            )
        if "emd" in tags and not turn.facial_description:
            raise InvariantViolation(
                "record tagged emd requires facial_description",
                record_index=index,
                field="facial_description",
            )
    return rec


def _check_media(rec: ManifestRecord, index: int, base_dir: Path):
    for turn in rec.all_turns():
        for ref in (turn.audio_ref, turn.video_ref):
            if ref and not (base_dir / ref).exists():
                raise MissingMedia(f"record {index}: missing media file {base_dir / ref}")


def parse_record(data: dict, index: int) -> ManifestRecord:
    try:
        kind = data["kind"]
        tags = tuple(data.get("task_tags", ()))
        if kind == "dialogue":
            return ManifestRecord(kind=kind, task_tags=tags, dialogue=Dialogue.from_dict(data["dialogue"]))
        if kind == "utterance":
            return ManifestRecord(
                kind=kind, task_tags=tags, utterance=UtteranceRecord.from_dict(data["utterance"])
            )
    except InvariantViolation as exc:
        raise InvariantViolation(str(exc), record_index=index, field=exc.field) from exc
    except KeyError as exc:
        raise InvariantViolation(f"record missing field {exc}", record_index=index) from exc
    raise InvariantViolation(f"unknown record kind {data.get('kind')!r}", record_index=index, field="kind")


def validate_manifest(
    path: str | Path,
    vocab: EmotionVocabulary | None = None,
    strict_emotions: bool = True,
    check_media: bool = True,
) -> DatasetManifest:
    """Load and fully validate a manifest file.

    Raises :class:`MalformedManifest` on syntax problems,
    :class:`InvariantViolation` on rule violations (with record index and
    field), and :class:`MissingMedia` when a referenced file is absent.
    Validation is idempotent: re-validating a saved manifest yields an
    equal manifest.
    """
    vocab = vocab or EmotionVocabulary()
    path = Path(path)
    if not path.exists():
        raise MalformedManifest(f"manifest not found: {path}")
    base_dir = path.resolve().parent

    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MalformedManifest(f"empty manifest: {path}")

    def parse_line(i, line):
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedManifest(f"{path}:{i + 1}: {exc}") from exc

    header = parse_line(0, lines[0])
    if header.get("format") != FORMAT_NAME:
        raise MalformedManifest(f"{path}: not an {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise MalformedManifest(f"{path}: unsupported version {header.get('version')}")
    split = header.get("split")
    if split not in SPLITS:
        raise MalformedManifest(f"{path}: bad split {split!r}")

    records = []
    for i, line in enumerate(lines[1:]):
        if not line.strip():
            continue
        rec = parse_record(parse_line(i + 1, line), i)
        rec = _check_record(rec, i, vocab, strict_emotions)
        if check_media:
            _check_media(rec, i, base_dir)
        records.append(rec)

    return DatasetManifest(split=split, records=tuple(records), base_dir=base_dir)

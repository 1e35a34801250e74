"""Synthetic desk-scale corpus generator.

Each user turn gets a harmonic tone whose fundamental pitch encodes the
emotion label, a short clip of a colored block whose color and motion
direction encode the same label, and a templated transcript. Each ai
turn mirrors the user's emotion with a fixed per-emotion response, so a
model must read the audio-visual features (not the transcript) to
answer correctly. Emotion is encoded redundantly in both modalities so
modality-ablation runs stay meaningful.

Everything is deterministic in the seed, including media bytes.
"""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np
from PIL import Image

from avemo.core.manifest import DatasetManifest, validate_manifest
from avemo.core.records import Dialogue, SpeakerMetadata, UtteranceRecord
from avemo.core.vocab import EmotionVocabulary
from avemo.preprocessing.audio import write_wav

SAMPLE_RATE = 16000
PITCH_BASE_HZ = 120.0
PITCH_STEP_HZ = 40.0
FRAME_SIZE = 96
FRAMES_PER_CLIP = 24
BLOCK_SIZE = 28

COLOR_TABLE = {
    "happy": (255, 210, 40),
    "sad": (60, 90, 220),
    "surprised": (240, 80, 240),
    "fearful": (140, 60, 200),
    "disgusted": (60, 200, 90),
    "angry": (230, 50, 40),
    "neutral": (150, 150, 150),
}
FALLBACK_COLORS = ((255, 120, 0), (0, 200, 200), (120, 255, 0), (200, 0, 120))

NOUNS = ("game", "weather", "movie", "garden", "meeting", "recipe")

# transcripts deliberately carry no emotion words: the label must come
# from tone of voice (pitch) or the face clip, never from the words
USER_TEMPLATES = (
    "i want to talk about the {noun}",
    "so the {noun} came up again today",
    "let me tell you about the {noun}",
)

AI_RESPONSES = {
    "happy": "that sounds wonderful, tell me more!",
    "sad": "i am sorry to hear that.",
    "surprised": "wow, that is unexpected!",
    "fearful": "that does sound scary, stay safe.",
    "disgusted": "ugh, that sounds gross.",
    "angry": "that would be frustrating, i understand.",
    "neutral": "okay, thanks for sharing.",
}

FACIAL_DESCRIPTIONS = {
    "happy": (
        "The corners of the mouth lift into a broad smile while the cheeks rise. "
        "The eyes narrow slightly and the brightness of the expression grows over time."
    ),
    "sad": (
        "The brows pull together and the corners of the mouth turn downward. "
        "The gaze drops gradually and the face settles into a heavy stillness."
    ),
    "surprised": (
        "The eyebrows shoot upward and the eyes widen quickly. "
        "The mouth opens into a round shape that eases only near the end."
    ),
    "fearful": (
        "The eyes widen with tension while the brows draw up and inward. "
        "The lips press thin and a slight backward pull of the head builds over the clip."
    ),
    "disgusted": (
        "The nose wrinkles and the upper lip rises sharply. "
        "The eyes squint as the head tilts away with growing aversion."
    ),
    "angry": (
        "The brows lower and knit tightly while the jaw clenches. "
        "The lips press together hard and the glare intensifies frame by frame."
    ),
    "neutral": (
        "The face stays relaxed with level brows and a closed, even mouth. "
        "Only small natural movements appear, with no visible change in expression."
    ),
}


def pitch_for_label(vocab: EmotionVocabulary, label: str) -> float:
    return PITCH_BASE_HZ + PITCH_STEP_HZ * vocab.index(label)


def color_for_label(vocab: EmotionVocabulary, label: str) -> tuple[int, int, int]:
    if label in COLOR_TABLE:
        return COLOR_TABLE[label]
    return FALLBACK_COLORS[vocab.index(label) % len(FALLBACK_COLORS)]


def ai_reply(label: str) -> tuple[str, str]:
    """AI (emotion, response) for a user emotion; the AI mirrors the user."""
    text = AI_RESPONSES.get(label, f"i hear that you feel {label}.")
    return label, text


def _tone(freq_hz: float, duration_s: float) -> np.ndarray:
    t = np.arange(int(duration_s * SAMPLE_RATE)) / SAMPLE_RATE
    tone = (
        1.0 * np.sin(2 * np.pi * freq_hz * t)
        + 0.5 * np.sin(2 * np.pi * 2 * freq_hz * t)
        + 0.25 * np.sin(2 * np.pi * 3 * freq_hz * t)
    )
    return tone / 1.75


INTENSITY_AMPLITUDE = {"low": 0.15, "medium": 0.35, "high": 0.62, "unspecified": 0.45}


def synth_waveform(
    pitch_hz: float,
    duration_s: float,
    noise_seed: int,
    template_index: int = 0,
    noun_index: int = 0,
    intensity: str = "unspecified",
) -> np.ndarray:
    """Emotion pitch segment followed by two content-coding tones.

    The leading segment carries the emotion (fundamental pitch) at an
    amplitude set by the intensity level; the two short trailing tones
    encode the transcript's template and noun, so speech recognition is
    learnable from the audio while staying independent of the emotion
    channel.
    """
    lead = _tone(pitch_hz, max(duration_s - 0.3, 0.2))
    template_tone = _tone(500.0 + 60.0 * template_index, 0.15)
    noun_tone = _tone(900.0 + 40.0 * noun_index, 0.15)
    amplitude = INTENSITY_AMPLITUDE.get(intensity, 0.45)
    tone = np.concatenate([amplitude * lead, 0.45 * template_tone, 0.45 * noun_tone])
    fade = min(len(tone) // 8, int(0.05 * SAMPLE_RATE))
    envelope = np.ones(len(tone))
    ramp = np.linspace(0.0, 1.0, fade)
    envelope[:fade] = ramp
    envelope[-fade:] = ramp[::-1]
    rng = np.random.default_rng(noise_seed)
    noise = 0.004 * rng.standard_normal(len(tone))
    return tone * envelope + noise


def synth_frames(
    color: tuple[int, int, int],
    direction_index: int,
    n_labels: int,
    jitter: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """Frames of a colored block drifting along a per-emotion direction."""
    angle = 2 * np.pi * direction_index / max(n_labels, 1)
    vx, vy = 3.0 * np.cos(angle), 3.0 * np.sin(angle)
    frames = np.zeros((FRAMES_PER_CLIP, FRAME_SIZE, FRAME_SIZE, 3), dtype=np.uint8)
    frames[:] = (20, 20, 24)
    for i in range(FRAMES_PER_CLIP):
        cx = int(FRAME_SIZE / 2 + jitter[0] + i * vx) % FRAME_SIZE
        cy = int(FRAME_SIZE / 2 + jitter[1] + i * vy) % FRAME_SIZE
        x0, y0 = cx - BLOCK_SIZE // 2, cy - BLOCK_SIZE // 2
        xs = np.arange(x0, x0 + BLOCK_SIZE) % FRAME_SIZE
        ys = np.arange(y0, y0 + BLOCK_SIZE) % FRAME_SIZE
        frames[i][np.ix_(ys, xs)] = color
    return frames


def _write_frames(frames: np.ndarray, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        Image.fromarray(frame).save(out_dir / f"frame_{i:03d}.png")


def generate_synthetic_corpus(
    out_dir: str | Path,
    seed: int,
    n_dialogues: int,
    rounds_per_dialogue: int,
    vocab: EmotionVocabulary | None = None,
    split: str = "train",
) -> DatasetManifest:
    """Write media plus a manifest under ``out_dir`` and return the manifest.

    Emotions cycle through the vocabulary so every label appears; nouns,
    templates, and durations vary under the seeded RNG.
    """
    if n_dialogues < 1:
        raise ValueError("n_dialogues must be >= 1")
    vocab = vocab or EmotionVocabulary()
    out_dir = Path(out_dir)
    media_dir = out_dir / "media"
    media_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    records = []
    turn_counter = 0
    for d in range(n_dialogues):
        dialogue_id = f"dlg{d:03d}"
        turns = []
        for r in range(rounds_per_dialogue):
            label = vocab.labels[turn_counter % len(vocab.labels)]
            noun_index = rng.randrange(len(NOUNS))
            template_index = rng.randrange(len(USER_TEMPLATES))
            transcript = USER_TEMPLATES[template_index].format(noun=NOUNS[noun_index])

            intensity = ("low", "medium", "high")[turn_counter % 3]
            audio_rel = f"media/{dialogue_id}_r{r}.wav"
            waveform = synth_waveform(
                pitch_for_label(vocab, label),
                duration_s=0.6 + 0.2 * rng.random(),
                noise_seed=seed * 100003 + turn_counter,
                template_index=template_index,
                noun_index=noun_index,
                intensity=intensity,
            )
            write_wav(out_dir / audio_rel, waveform, SAMPLE_RATE)

            video_rel = f"media/{dialogue_id}_r{r}_video"
            jitter = (rng.randint(-8, 8), rng.randint(-8, 8))
            _write_frames(
                synth_frames(
                    color_for_label(vocab, label), vocab.index(label), len(vocab.labels), jitter
                ),
                out_dir / video_rel,
            )

            metadata = SpeakerMetadata(
                emotion=label,
                emotion_intensity=intensity,
                gender=("female", "male")[d % 2],
                age=22 + (d * 3) % 40,
            )
            turns.append(
                UtteranceRecord(
                    speaker="user",
                    transcript=transcript,
                    emotion=label,
                    audio_ref=audio_rel,
                    video_ref=video_rel,
                    metadata=metadata,
                    facial_description=FACIAL_DESCRIPTIONS.get(
                        label, f"The face shows a clear {label} expression. It holds steady throughout."
                    ),
                )
            )
            ai_emotion, ai_text = ai_reply(label)
            turns.append(UtteranceRecord(speaker="ai", transcript=ai_text, emotion=ai_emotion))
            turn_counter += 1
        dialogue = Dialogue(dialogue_id=dialogue_id, turns=tuple(turns))
        records.append(
            {
                "kind": "dialogue",
                "task_tags": ["asr", "ser", "emr", "emd", "dialogue"],
                "dialogue": dialogue.to_dict(),
            }
        )

    manifest_path = out_dir / "manifest.jsonl"
    import json

    header = {"format": "avemo-manifest", "version": 1, "split": split}
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            fh.write(json.dumps(rec) + "\n")

    return validate_manifest(manifest_path, vocab=vocab)

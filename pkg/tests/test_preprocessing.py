import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avemo.core import EmotionVocabulary, validate_manifest
from avemo.errors import DecodeError, EmptyAudio, EmptyVideo, MissingMedia, SampleRateMismatch
from avemo.preprocessing import (
    FeatureCache,
    MelConfig,
    NullFaceDetector,
    VideoConfig,
    compute_log_mel,
    crop_face,
    crop_sequence,
    generate_synthetic_corpus,
    pitch_for_label,
    preprocess_utterance,
    read_wav,
    sample_frames,
    write_wav,
)
from avemo.preprocessing.synthetic import SAMPLE_RATE, synth_frames, synth_waveform


class TestLogMel:
    def test_one_second_of_silence(self):
        cfg = MelConfig()
        mel = compute_log_mel(np.zeros(16000), 16000, cfg)
        assert mel.shape == (100, 80)
        assert np.allclose(mel, math.log(cfg.log_floor))

    def test_two_seconds(self):
        mel = compute_log_mel(np.zeros(32000), 16000)
        assert mel.shape[0] == 200

    def test_empty_waveform(self):
        with pytest.raises(EmptyAudio):
            compute_log_mel(np.array([]), 16000)

    def test_sample_rate_mismatch(self):
        with pytest.raises(SampleRateMismatch):
            compute_log_mel(np.zeros(8000), 8000)

    def test_doubling_length_doubles_frames(self):
        cfg = MelConfig()
        rng = np.random.default_rng(0)
        for n in (4000, 7043, 16000):
            wave = rng.standard_normal(n) * 0.1
            a = compute_log_mel(wave, 16000, cfg).shape[0]
            b = compute_log_mel(np.concatenate([wave, wave]), 16000, cfg).shape[0]
            assert a == n // cfg.hop_samples
            assert b == 2 * a

    def test_tone_peaks_at_expected_mel_band(self):
        t = np.arange(16000) / 16000
        low = compute_log_mel(np.sin(2 * np.pi * 150 * t), 16000).mean(axis=0)
        high = compute_log_mel(np.sin(2 * np.pi * 2000 * t), 16000).mean(axis=0)
        assert np.argmax(low) < np.argmax(high)


class TestWav:
    def test_roundtrip(self, tmp_path):
        wave = 0.5 * np.sin(np.linspace(0, 40 * np.pi, 8000))
        path = tmp_path / "t.wav"
        write_wav(path, wave, 16000)
        back, sr = read_wav(path)
        assert sr == 16000
        assert np.abs(back - wave).max() < 1e-3

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"not a wav at all")
        with pytest.raises(DecodeError):
            read_wav(path)


class TestSampleFrames:
    def test_hand_cases(self):
        assert sample_frames(95, 10) == list(range(0, 95, 10))
        assert len(sample_frames(95, 10)) == 10
        assert sample_frames(10, 10) == [0]
        assert sample_frames(1, 99) == [0]

    def test_empty(self):
        with pytest.raises(EmptyVideo):
            sample_frames(0, 10)

    @settings(max_examples=200, deadline=None)
    @given(n=st.integers(min_value=1, max_value=1000), stride=st.sampled_from([1, 5, 10]))
    def test_count_is_ceil(self, n, stride):
        assert len(sample_frames(n, stride)) == math.ceil(n / stride)


class TestCropFace:
    def test_detector_box_used(self):
        frame = np.zeros((256, 256, 3), dtype=np.float32)
        frame[100:156, 100:156] = 1.0

        class Boxed:
            def detect(self, f):
                return (100, 100, 156, 156)

        crop, fallback = crop_face(frame, Boxed())
        assert crop.shape == (96, 96, 3)
        assert not fallback
        assert crop.mean() > 0.9

    def test_fallback_center(self):
        frame = np.zeros((128, 256, 3), dtype=np.float32)
        frame[:, 64:192] = 1.0  # center square of the wide frame
        crop, fallback = crop_face(frame, NullFaceDetector())
        assert fallback
        assert crop.mean() > 0.99

    def test_small_frame_upscaled(self):
        frame = np.ones((64, 64, 3), dtype=np.float32)
        crop, _ = crop_face(frame, NullFaceDetector())
        assert crop.shape == (96, 96, 3)


class TestSyntheticCorpus:
    def test_generates_valid_corpus(self, tmp_path):
        manifest = generate_synthetic_corpus(tmp_path, seed=0, n_dialogues=3, rounds_per_dialogue=2)
        assert len(manifest.dialogues()) == 3
        assert all(d.num_rounds == 2 for d in manifest.dialogues())
        # revalidate from disk
        again = validate_manifest(tmp_path / "manifest.jsonl")
        assert again.records == manifest.records

    def test_determinism(self, tmp_path):
        generate_synthetic_corpus(tmp_path / "a", seed=7, n_dialogues=2, rounds_per_dialogue=2)
        generate_synthetic_corpus(tmp_path / "b", seed=7, n_dialogues=2, rounds_per_dialogue=2)
        a = (tmp_path / "a" / "manifest.jsonl").read_bytes()
        b = (tmp_path / "b" / "manifest.jsonl").read_bytes()
        assert a == b
        wav_a = (tmp_path / "a" / "media" / "dlg000_r0.wav").read_bytes()
        wav_b = (tmp_path / "b" / "media" / "dlg000_r0.wav").read_bytes()
        assert wav_a == wav_b

    def test_pitch_separation(self):
        vocab = EmotionVocabulary()
        pitches = [pitch_for_label(vocab, label) for label in vocab.labels]
        gaps = [b - a for a, b in zip(pitches, pitches[1:])]
        assert all(g >= 20.0 for g in gaps)

    def test_waveform_has_expected_pitch(self):
        wave = synth_waveform(200.0, 1.0, noise_seed=1)
        spectrum = np.abs(np.fft.rfft(wave))
        freqs = np.fft.rfftfreq(len(wave), 1 / SAMPLE_RATE)
        peak = freqs[np.argmax(spectrum)]
        assert abs(peak - 200.0) < 5.0

    def test_frames_contain_color(self):
        frames = synth_frames((255, 0, 0), 0, 7)
        assert frames.shape == (24, 96, 96, 3)
        assert (frames[..., 0] == 255).any()


class TestCache:
    def test_preprocess_and_hit(self, tmp_path):
        manifest = generate_synthetic_corpus(tmp_path / "corpus", seed=1, n_dialogues=1, rounds_per_dialogue=1)
        cache = FeatureCache(tmp_path / "cache")
        rec = manifest.dialogues()[0].turns[0]
        keys = preprocess_utterance(rec, manifest.base_dir, cache)
        assert set(keys) == {"mel", "crops"}
        mel, meta = cache.get(keys["mel"])
        assert meta["kind"] == "mel" and mel.shape[1] == 80
        crops, _ = cache.get(keys["crops"])
        assert crops.shape[1:] == (96, 96, 3)
        # second run is a no-op with identical keys
        mtimes = {p: p.stat().st_mtime_ns for p in (tmp_path / "cache").iterdir()}
        keys2 = preprocess_utterance(rec, manifest.base_dir, cache)
        assert keys2 == keys
        assert mtimes == {p: p.stat().st_mtime_ns for p in (tmp_path / "cache").iterdir()}

    def test_content_addressing(self, tmp_path):
        cache = FeatureCache(tmp_path / "cache")
        wav_path = tmp_path / "x.wav"
        wave = 0.3 * np.sin(np.linspace(0, 100, 4000))
        write_wav(wav_path, wave, 16000)
        cfg = MelConfig()
        key1 = cache.key(wav_path, cfg.config_hash(), "mel")
        wave[1234 % len(wave)] += 0.01  # change one sample
        write_wav(wav_path, wave, 16000)
        key2 = cache.key(wav_path, cfg.config_hash(), "mel")
        assert key1 != key2

    def test_missing_media(self, tmp_path):
        from avemo.core.records import UtteranceRecord

        cache = FeatureCache(tmp_path / "cache")
        rec = UtteranceRecord(speaker="user", transcript="x", emotion="happy", audio_ref="gone.wav")
        with pytest.raises(MissingMedia):
            preprocess_utterance(rec, tmp_path, cache)

    def test_corrupt_media_names_file(self, tmp_path):
        from avemo.core.records import UtteranceRecord

        cache = FeatureCache(tmp_path / "cache")
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"nope")
        rec = UtteranceRecord(speaker="user", transcript="x", emotion="happy", audio_ref="bad.wav")
        with pytest.raises(DecodeError) as err:
            preprocess_utterance(rec, tmp_path, cache)
        assert "bad.wav" in str(err.value)

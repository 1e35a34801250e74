import io
import json
import wave
import zipfile

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient

from avemo.errors import TurnTooLarge
from avemo.preprocessing.synthetic import SAMPLE_RATE, synth_frames, synth_waveform
from avemo.service.app import create_app
from avemo.service.sessions import truncate_history
from avemo.system import DialogueSystem, SystemConfig

VOCAB_LABELS = ("happy", "sad", "surprised", "fearful", "disgusted", "angry", "neutral")


def wav_bytes(pitch=200.0, duration=0.4, seed=0) -> bytes:
    data = synth_waveform(pitch, duration, seed)
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes((np.clip(data, -1, 1) * 32767).astype("<i2").tobytes())
    return buf.getvalue()


def zip_bytes() -> bytes:
    from PIL import Image

    frames = synth_frames((255, 0, 0), 0, 7)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for i, frame in enumerate(frames[:12]):
            png = io.BytesIO()
            Image.fromarray(frame).save(png, format="PNG")
            zf.writestr(f"frame_{i:03d}.png", png.getvalue())
    return buf.getvalue()


@pytest.fixture(scope="module")
def client():
    torch.manual_seed(0)
    system = DialogueSystem(SystemConfig.tiny()).eval()
    app = create_app(system=system, reserve=64, max_generate_seconds=120.0)
    return TestClient(app, raise_server_exceptions=False)


class TestTruncateHistory:
    def test_arithmetic_case(self):
        sizes = [1200] * 5
        first_kept = truncate_history(sizes, budget=4096, reserve=256)
        assert first_kept == 2  # keeps the newest three rounds (3600 <= 3840)

    def test_under_budget_unchanged(self):
        assert truncate_history([100, 100], budget=4096, reserve=256) == 0

    def test_single_oversized_round_dropped_from_history(self):
        # a 5000-token past round simply cannot be kept
        assert truncate_history([5000], budget=4096, reserve=256) == 1

    def test_oversized_incoming_turn(self):
        with pytest.raises(TurnTooLarge):
            truncate_history([], budget=4096, reserve=256, incoming=5000)


class TestSessionLifecycle:
    def test_create_returns_distinct_ids(self, client):
        a = client.post("/v1/sessions").json()["session_id"]
        b = client.post("/v1/sessions").json()["session_id"]
        assert a != b

    def test_create_before_checkpoint_load(self):
        app = create_app(system=None)
        bare = TestClient(app, raise_server_exceptions=False)
        resp = bare.post("/v1/sessions")
        assert resp.status_code == 503
        assert resp.json()["code"] == "ServerNotReady"

    def test_health(self, client):
        body = client.get("/v1/health").json()
        assert body["status"] == "ok"
        assert "checkpoint_hash" in body
        assert len(body["prompt_set_hash"]) == 64

    def test_unknown_session(self, client):
        assert client.get("/v1/sessions/nope").status_code == 404

    def test_delete(self, client):
        sid = client.post("/v1/sessions").json()["session_id"]
        assert client.delete(f"/v1/sessions/{sid}").json() == {"deleted": True}
        assert client.get(f"/v1/sessions/{sid}").status_code == 404


class TestTurns:
    def test_first_turn_audio_video(self, client):
        sid = client.post("/v1/sessions").json()["session_id"]
        resp = client.post(
            f"/v1/sessions/{sid}/turns",
            files={
                "audio": ("a.wav", wav_bytes(), "audio/wav"),
                "video": ("v.zip", zip_bytes(), "application/zip"),
            },
        )
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["round_index"] == 1
        assert body["emotion"] in VOCAB_LABELS
        assert isinstance(body["text"], str)

    def test_audio_only_turn(self, client):
        sid = client.post("/v1/sessions").json()["session_id"]
        resp = client.post(
            f"/v1/sessions/{sid}/turns", files={"audio": ("a.wav", wav_bytes(), "audio/wav")}
        )
        assert resp.status_code == 200
        assert any("audio-only" in w for w in resp.json()["warnings"])

    def test_corrupt_audio_leaves_history_unchanged(self, client):
        sid = client.post("/v1/sessions").json()["session_id"]
        client.post(f"/v1/sessions/{sid}/turns", files={"audio": ("a.wav", wav_bytes(), "audio/wav")})
        before = json.dumps(client.get(f"/v1/sessions/{sid}").json(), sort_keys=True)
        resp = client.post(
            f"/v1/sessions/{sid}/turns", files={"audio": ("a.wav", b"not audio", "audio/wav")}
        )
        assert resp.status_code == 400
        assert resp.json()["code"] == "DecodeError"
        after = json.dumps(client.get(f"/v1/sessions/{sid}").json(), sort_keys=True)
        assert before == after

    def test_transcript_grows_per_round(self, client):
        sid = client.post("/v1/sessions").json()["session_id"]
        for i in range(2):
            resp = client.post(
                f"/v1/sessions/{sid}/turns",
                files={"audio": ("a.wav", wav_bytes(seed=i), "audio/wav")},
            )
            assert resp.json()["round_index"] == i + 1
        rounds = client.get(f"/v1/sessions/{sid}").json()["rounds"]
        assert len(rounds) == 2
        assert all(not r["dropped"] for r in rounds)

    def test_session_isolation_interleaved_equals_serial(self, client):
        def run_serial():
            sid = client.post("/v1/sessions").json()["session_id"]
            out = []
            for i in range(2):
                resp = client.post(
                    f"/v1/sessions/{sid}/turns",
                    files={"audio": ("a.wav", wav_bytes(pitch=150 + 30 * i, seed=i), "audio/wav")},
                )
                out.append((resp.json()["emotion"], resp.json()["text"]))
            return out

        serial = run_serial()

        sid_a = client.post("/v1/sessions").json()["session_id"]
        sid_b = client.post("/v1/sessions").json()["session_id"]
        inter_a, inter_b = [], []
        for i in range(2):
            ra = client.post(
                f"/v1/sessions/{sid_a}/turns",
                files={"audio": ("a.wav", wav_bytes(pitch=150 + 30 * i, seed=i), "audio/wav")},
            )
            rb = client.post(
                f"/v1/sessions/{sid_b}/turns",
                files={"audio": ("a.wav", wav_bytes(pitch=150 + 30 * i, seed=i), "audio/wav")},
            )
            inter_a.append((ra.json()["emotion"], ra.json()["text"]))
            inter_b.append((rb.json()["emotion"], rb.json()["text"]))
        assert inter_a == serial
        assert inter_b == serial


class TestAuth:
    def test_token_required_when_configured(self):
        torch.manual_seed(0)
        system = DialogueSystem(SystemConfig.tiny()).eval()
        app = create_app(system=system, auth_token="s3cret")
        client = TestClient(app, raise_server_exceptions=False)
        assert client.post("/v1/sessions").status_code == 401
        ok = client.post("/v1/sessions", headers={"Authorization": "Bearer s3cret"})
        assert ok.status_code == 200

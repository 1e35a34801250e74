"""HTTP serving layer: turn-based sessions over a loaded checkpoint.

Endpoints (bodies are JSON unless noted):

* ``POST /v1/sessions`` -> ``{"session_id"}``
* ``POST /v1/sessions/{id}/turns`` -- multipart with ``audio`` (16-bit
  PCM WAV, required) and ``video`` (zip of PNG frames or MP4, optional)
  -> ``{"emotion", "text", "round_index", "warnings"}``
* ``GET /v1/sessions/{id}`` -> transcript with truncation markers
* ``DELETE /v1/sessions/{id}`` -> ``{"deleted": true}``
* ``GET /v1/health`` -> ``{"status", "checkpoint_hash", "prompt_set_hash"}``

Errors return ``{"code", "message"}``: 400 undecodable media, 401 bad
token, 404 unknown session, 409 busy session, 413 turn too large, 503
not ready, 504 generation timeout. Requests within one session are
serialized; distinct sessions may run concurrently, model access gated
by a bounded semaphore.
"""

from __future__ import annotations

import concurrent.futures
import io
import tempfile
import threading
import time
import zipfile
from pathlib import Path

import torch
from fastapi import Depends, FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse

from avemo.core.vocab import EmotionVocabulary
from avemo.errors import (
    AvemoError,
    DataError,
    DecodeError,
    GenerationTimeout,
    ServerNotReady,
    TurnTooLarge,
    UnknownSession,
)
from avemo.lm.model import DecodeConfig
from avemo.preprocessing.audio import compute_log_mel, read_wav
from avemo.preprocessing.video import crop_sequence, load_frames
from avemo.prompts import PROMPT_SET_HASH, format_ai_target, parse_ai_output
from avemo.service.sessions import DEFAULT_RESERVE, Session, SessionStore
from avemo.training.builders import Stage3Round, build_stage3_context, stage3_prefix_len

STATUS_BY_ERROR = (
    (UnknownSession, 404),
    (TurnTooLarge, 413),
    (ServerNotReady, 503),
    (GenerationTimeout, 504),
    (DataError, 400),
)


def _status_for(exc: AvemoError) -> int:
    for cls, status in STATUS_BY_ERROR:
        if isinstance(exc, cls):
            return status
    return 500


class TurnPipeline:
    """Media decode -> encoders -> context -> generation -> parse."""

    def __init__(self, system, vocab: EmotionVocabulary, reserve: int, max_generate_seconds: float,
                 max_concurrency: int = 2):
        self.system = system
        self.vocab = vocab
        self.reserve = reserve
        self.max_generate_seconds = max_generate_seconds
        self.model_gate = threading.Semaphore(max_concurrency)
        self.executor = concurrent.futures.ThreadPoolExecutor(max_workers=max_concurrency)

    def decode_audio(self, data: bytes) -> torch.Tensor:
        with tempfile.NamedTemporaryFile(suffix=".wav") as tmp:
            tmp.write(data)
            tmp.flush()
            waveform, sr = read_wav(tmp.name)
        return torch.from_numpy(compute_log_mel(waveform, sr, self.system.cfg.mel))

    def decode_video(self, data: bytes, filename: str) -> torch.Tensor:
        suffix = Path(filename or "clip").suffix.lower()
        with tempfile.TemporaryDirectory() as tmpdir:
            tmpdir = Path(tmpdir)
            if suffix == ".zip":
                try:
                    with zipfile.ZipFile(io.BytesIO(data)) as zf:
                        frame_dir = tmpdir / "frames"
                        frame_dir.mkdir()
                        for name in zf.namelist():
                            if name.lower().endswith(".png") and "/" not in name.strip("/"):
                                (frame_dir / Path(name).name).write_bytes(zf.read(name))
                except zipfile.BadZipFile as exc:
                    raise DecodeError(f"bad frame archive: {exc}") from exc
                frames, fps = load_frames(frame_dir)
            else:
                clip = tmpdir / f"clip{suffix or '.mp4'}"
                clip.write_bytes(data)
                frames, fps = load_frames(clip)
            seq, _ = crop_sequence(frames, fps, cfg=self.system.cfg.video)
        return torch.from_numpy(seq.crops)

    def run_turn(self, session: Session, audio_bytes: bytes, video: tuple[bytes, str] | None) -> dict:
        warnings: list[str] = []
        mel = self.decode_audio(audio_bytes)
        crops = self.decode_video(*video) if video else None
        modalities = ("audio", "video") if crops is not None else ("audio",)
        if crops is None:
            warnings.append("no video supplied; audio-only turn")

        with torch.no_grad():
            current = Stage3Round(
                transcript="",
                metadata_text="",
                ai_emotion=self.vocab.default_label,
                ai_text="",
                ai_target=(),
                f_a=self.system.encode_audio(mel),
                f_v=self.system.encode_video(crops) if crops is not None else None,
            )

        # size the incoming turn from a history-free context (system prompt included)
        probe = build_stage3_context(self.system, [], current, modalities, reserve=self.reserve)
        kept, to_drop = session.plan_truncation(incoming=probe.total_len)
        history = [r.materials for r in kept]
        context = build_stage3_context(self.system, history, current, modalities, reserve=self.reserve)

        def generate():
            with self.model_gate:
                with torch.no_grad():
                    return self.system.model.generate(context, session.decode, max_new=self.reserve)

        future = self.executor.submit(generate)
        try:
            ids = future.result(timeout=self.max_generate_seconds)
        except concurrent.futures.TimeoutError as exc:
            raise GenerationTimeout(f"generation exceeded {self.max_generate_seconds}s") from exc

        parsed = parse_ai_output(self.system.tokenizer, ids, self.vocab, mode="lenient")
        if parsed.warning:
            warnings.append("reply missing or malformed emotion tag; defaulted")
        reply_text = parsed.text or "..."
        canonical = format_ai_target(self.system.tokenizer, parsed.emotion, reply_text, self.vocab)
        completed = Stage3Round(
            transcript="",
            metadata_text="",
            ai_emotion=parsed.emotion,
            ai_text=reply_text,
            ai_target=canonical,
            f_a=current.f_a,
            f_v=current.f_v,
        )
        # per-round cost excludes the shared system prompt, which the
        # incoming-turn probe accounts for exactly once
        cost = (probe.total_len - stage3_prefix_len(self.system)) + len(canonical)
        return {
            "emotion": parsed.emotion,
            "text": reply_text,
            "warnings": warnings,
            "materials": completed,
            "token_cost": cost,
            "to_drop": to_drop,
        }


def create_app(
    system=None,
    checkpoint_path: str | Path | None = None,
    vocab: EmotionVocabulary | None = None,
    reserve: int = DEFAULT_RESERVE,
    session_ttl: float | None = 3600.0,
    snapshot_dir: str | Path | None = None,
    auth_token: str | None = None,
    max_generate_seconds: float = 120.0,
) -> FastAPI:
    vocab = vocab or EmotionVocabulary()
    checkpoint_digest = None
    if system is None and checkpoint_path is not None:
        from avemo.system import checkpoint_hash, load_checkpoint

        system, _ = load_checkpoint(checkpoint_path)
        checkpoint_digest = checkpoint_hash(checkpoint_path)

    app = FastAPI(title="avemo dialogue service", version="0.1.0")
    store = SessionStore(ttl_seconds=session_ttl, snapshot_dir=snapshot_dir)
    pipeline = TurnPipeline(system, vocab, reserve, max_generate_seconds) if system is not None else None
    app.state.store = store
    app.state.system = system

    async def check_auth(request: Request):
        if auth_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {auth_token}":
            raise PermissionError("missing or invalid bearer token")

    @app.exception_handler(AvemoError)
    async def avemo_error_handler(_, exc: AvemoError):
        return JSONResponse(
            status_code=_status_for(exc), content={"code": type(exc).__name__, "message": str(exc)}
        )

    @app.exception_handler(PermissionError)
    async def auth_error_handler(_, exc: PermissionError):
        return JSONResponse(status_code=401, content={"code": "Unauthorized", "message": str(exc)})

    @app.get("/v1/health")
    async def health():
        return {
            "status": "ok" if system is not None else "no checkpoint loaded",
            "checkpoint_hash": checkpoint_digest,
            "prompt_set_hash": PROMPT_SET_HASH,
        }

    @app.post("/v1/sessions", dependencies=[Depends(check_auth)])
    async def create_session(overrides: dict | None = None):
        if pipeline is None:
            raise ServerNotReady("no checkpoint loaded")
        kwargs = {"reserve": reserve, "token_budget": system.cfg.decoder.context_len - reserve}
        if overrides:
            decode = overrides.get("decode")
            if decode:
                kwargs["decode"] = DecodeConfig(**decode)
        session = store.create(**kwargs)
        return {"session_id": session.session_id}

    @app.post("/v1/sessions/{session_id}/turns", dependencies=[Depends(check_auth)])
    async def post_turn(session_id: str, audio: UploadFile, video: UploadFile | None = None):
        if pipeline is None:
            raise ServerNotReady("no checkpoint loaded")
        session = store.get(session_id)
        audio_bytes = await audio.read()
        video_payload = (await video.read(), video.filename or "") if video is not None else None
        if not session.lock.acquire(blocking=False):
            return JSONResponse(
                status_code=409,
                content={"code": "SessionBusy", "message": "a turn is already in flight"},
            )
        try:
            result = pipeline.run_turn(session, audio_bytes, video_payload)
            from avemo.service.sessions import CompletedRound

            completed = CompletedRound(
                index=len(session.rounds) + 1,
                materials=result["materials"],
                token_cost=result["token_cost"],
                emotion=result["emotion"],
                text=result["text"],
                created_at=time.time(),
            )
            for stale in result["to_drop"]:
                stale.dropped = True
            session.rounds.append(completed)
            session.last_active = time.time()
            store.snapshot(session)
            return {
                "emotion": result["emotion"],
                "text": result["text"],
                "round_index": completed.index,
                "warnings": result["warnings"],
            }
        finally:
            session.lock.release()

    @app.get("/v1/sessions/{session_id}", dependencies=[Depends(check_auth)])
    async def get_transcript(session_id: str):
        return store.get(session_id).transcript()

    @app.delete("/v1/sessions/{session_id}", dependencies=[Depends(check_auth)])
    async def delete_session(session_id: str):
        store.delete(session_id)
        return {"deleted": True}

    return app

"""In-memory dialogue sessions with budgeted history.

Rounds accumulate per session; the token budget (context minus a
generation reserve) decides how many of the newest whole rounds stay in
the assembled context. Dropped rounds remain in the transcript, marked.
Optional snapshots persist rounds (features included) keyed by
session_id so a server restart can resume a conversation.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import torch

from avemo.errors import TurnTooLarge, UnknownSession
from avemo.lm.model import DecodeConfig
from avemo.training.builders import Stage3Round

DEFAULT_BUDGET = 4096
DEFAULT_RESERVE = 256


def truncate_history(
    sizes: list[int], budget: int = DEFAULT_BUDGET, reserve: int = DEFAULT_RESERVE, incoming: int = 0
) -> int:
    """Index of the first kept round.

    Keeps the newest whole rounds whose total, plus the incoming turn's
    material and the generation reserve, fits the budget. Raises
    :class:`TurnTooLarge` when the incoming turn cannot fit even with
    every prior round dropped.
    """
    available = budget - reserve - incoming
    if available < 0:
        raise TurnTooLarge(
            f"turn of {incoming} tokens exceeds budget {budget} minus reserve {reserve} on its own"
        )
    total = 0
    first_kept = len(sizes)
    for i in range(len(sizes) - 1, -1, -1):
        if total + sizes[i] > available:
            break
        total += sizes[i]
        first_kept = i
    return first_kept


@dataclass
class CompletedRound:
    index: int  # 1-based
    materials: Stage3Round
    token_cost: int
    emotion: str
    text: str
    created_at: float
    dropped: bool = False


@dataclass
class Session:
    session_id: str
    token_budget: int = DEFAULT_BUDGET - DEFAULT_RESERVE
    reserve: int = DEFAULT_RESERVE
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    rounds: list[CompletedRound] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    last_active: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def active_rounds(self) -> list[CompletedRound]:
        return [r for r in self.rounds if not r.dropped]

    def plan_truncation(self, incoming: int) -> tuple[list[CompletedRound], list[CompletedRound]]:
        """(kept, to_drop) so that history + incoming + reserve fit the budget.

        Pure planning: callers mark ``to_drop`` rounds dropped only once
        the turn succeeds, keeping failed turns free of side effects.
        """
        active = self.active_rounds()
        sizes = [r.token_cost for r in active]
        first_kept = truncate_history(
            sizes, budget=self.token_budget + self.reserve, reserve=self.reserve, incoming=incoming
        )
        return active[first_kept:], active[:first_kept]

    def transcript(self) -> dict:
        return {
            "session_id": self.session_id,
            "rounds": [
                {
                    "round_index": r.index,
                    "emotion": r.emotion,
                    "text": r.text,
                    "created_at": r.created_at,
                    "dropped": r.dropped,
                }
                for r in self.rounds
            ],
        }


class SessionStore:
    def __init__(self, ttl_seconds: float | None = None, snapshot_dir: str | Path | None = None):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.ttl_seconds = ttl_seconds
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else None
        if self.snapshot_dir:
            self.snapshot_dir.mkdir(parents=True, exist_ok=True)

    def create(self, **session_kwargs) -> Session:
        self.evict_idle()
        session = Session(session_id=uuid.uuid4().hex, **session_kwargs)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            session = self._load_snapshot(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        session.last_active = time.time()
        return session

    def delete(self, session_id: str) -> bool:
        with self._lock:
            found = self._sessions.pop(session_id, None) is not None
        if self.snapshot_dir:
            path = self._snapshot_path(session_id)
            if path.exists():
                path.unlink()
                found = True
        if not found:
            raise UnknownSession(f"no session {session_id!r}")
        return True

    def evict_idle(self):
        if self.ttl_seconds is None:
            return
        cutoff = time.time() - self.ttl_seconds
        with self._lock:
            for sid in [s for s, sess in self._sessions.items() if sess.last_active < cutoff]:
                del self._sessions[sid]

    def _snapshot_path(self, session_id: str) -> Path:
        return self.snapshot_dir / f"{session_id}.pt"

    def snapshot(self, session: Session):
        if not self.snapshot_dir:
            return
        payload = {
            "session_id": session.session_id,
            "token_budget": session.token_budget,
            "reserve": session.reserve,
            "created_at": session.created_at,
            "rounds": [
                {
                    "index": r.index,
                    "emotion": r.emotion,
                    "text": r.text,
                    "token_cost": r.token_cost,
                    "created_at": r.created_at,
                    "dropped": r.dropped,
                    "metadata_text": r.materials.metadata_text,
                    "ai_target": list(r.materials.ai_target),
                    "f_a": r.materials.f_a,
                    "f_v": r.materials.f_v,
                }
                for r in session.rounds
            ],
        }
        torch.save(payload, self._snapshot_path(session.session_id))

    def _load_snapshot(self, session_id: str) -> Session | None:
        if not self.snapshot_dir:
            return None
        path = self._snapshot_path(session_id)
        if not path.exists():
            return None
        payload = torch.load(path, weights_only=False)
        session = Session(
            session_id=payload["session_id"],
            token_budget=payload["token_budget"],
            reserve=payload["reserve"],
            created_at=payload["created_at"],
        )
        for r in payload["rounds"]:
            materials = Stage3Round(
                transcript="",
                metadata_text=r["metadata_text"],
                ai_emotion=r["emotion"],
                ai_text=r["text"],
                ai_target=tuple(r["ai_target"]),
                f_a=r["f_a"],
                f_v=r["f_v"],
            )
            session.rounds.append(
                CompletedRound(
                    index=r["index"],
                    materials=materials,
                    token_cost=r["token_cost"],
                    emotion=r["emotion"],
                    text=r["text"],
                    created_at=r["created_at"],
                    dropped=r["dropped"],
                )
            )
        with self._lock:
            self._sessions[session_id] = session
        return session

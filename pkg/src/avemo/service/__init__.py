from avemo.service.app import create_app
from avemo.service.sessions import CompletedRound, Session, SessionStore, truncate_history

__all__ = ["CompletedRound", "Session", "SessionStore", "create_app", "truncate_history"]

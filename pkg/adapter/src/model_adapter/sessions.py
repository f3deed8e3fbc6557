"""Session store for stateful mask propagation.

The wire contract stays stateless by parking per-video predictor state
here under a caller-chosen key. Sessions idle past the TTL are dropped on
the next access, so abandoned videos cannot pin memory.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable


@dataclass
class Session:
    """One video's propagation state and when it was last used."""

    session_id: str
    state: object
    last_seen: float


@dataclass
class SessionStore:
    """Thread-safe keyed store with idle eviction."""

    ttl_s: float = 300.0
    clock: Callable[[], float] = time.monotonic
    _sessions: dict[str, Session] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def put(self, session_id: str, state: object) -> None:
        """Create or replace a session's state and refresh its clock."""
        with self._lock:
            self._evict_stale()
            self._sessions[session_id] = Session(session_id, state, self.clock())

    def get(self, session_id: str) -> Session | None:
        """Fetch a live session, refreshing its idle clock, else None."""
        with self._lock:
            self._evict_stale()
            session = self._sessions.get(session_id)
            if session is not None:
                session.last_seen = self.clock()
            return session

    def drop(self, session_id: str) -> None:
        """Forget a session if it exists."""
        with self._lock:
            self._sessions.pop(session_id, None)

    def __len__(self) -> int:
        with self._lock:
            self._evict_stale()
            return len(self._sessions)

    def _evict_stale(self) -> None:
        # Caller holds the lock.
        cutoff = self.clock() - self.ttl_s
        stale = [k for k, s in self._sessions.items() if s.last_seen < cutoff]
        for key in stale:
            del self._sessions[key]

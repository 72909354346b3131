"""In-memory session store backing the interactive service."""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from composekit import imgio
from composekit.geometry import PixelBox, SquareFrame


@dataclass
class Placement:
    segment_id: str | None
    box: PixelBox


@dataclass
class SessionState:
    session_id: str
    background: np.ndarray
    frame: SquareFrame
    scene: object = None                 # cached SceneInput
    predictions: list = field(default_factory=list)
    placements: list[Placement] = field(default_factory=list)
    candidates: dict[int, object] = field(default_factory=dict)
    images: dict[str, bytes] = field(default_factory=dict)
    provenance: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def size(self) -> tuple[int, int]:
        h, w = self.background.shape[:2]
        return w, h


class SessionStore:
    """Thread-safe map of sessions; per-session mutations serialize on the
    session's own lock."""

    def __init__(self, persist_dir: str | Path | None = None):
        self._sessions: dict[str, SessionState] = {}
        self._guard = threading.Lock()
        self.persist_dir = Path(persist_dir) if persist_dir else None

    def create(self, background: np.ndarray, frame: SquareFrame) -> SessionState:
        session = SessionState(
            session_id=uuid.uuid4().hex[:12],
            background=background,
            frame=frame,
        )
        session.images["background.png"] = imgio.encode_png(background)
        with self._guard:
            self._sessions[session.session_id] = session
        self._persist(session, "background.png")
        return session

    def get(self, session_id: str) -> SessionState | None:
        with self._guard:
            return self._sessions.get(session_id)

    def __len__(self) -> int:
        with self._guard:
            return len(self._sessions)

    def _persist(self, session: SessionState, *names: str) -> None:
        if self.persist_dir is None:
            return
        folder = self.persist_dir / session.session_id
        folder.mkdir(parents=True, exist_ok=True)
        for name in names:
            data = session.images.get(name)
            if data is not None:
                (folder / name).write_bytes(data)

    def persist_state(self, session: SessionState) -> None:
        if self.persist_dir is None:
            return
        folder = self.persist_dir / session.session_id
        folder.mkdir(parents=True, exist_ok=True)
        spec = {
            "session_id": session.session_id,
            "placements": [
                {"segment_id": p.segment_id, "box": list(p.box.as_xywh())}
                for p in session.placements
            ],
            "provenance": session.provenance,
        }
        (folder / "spec.json").write_text(json.dumps(spec, indent=2))
        self._persist(session, "composite.png", "heatmap.png")

"""Session registry: one pipeline per session, background optimization, and a
thread-safe event buffer for server-sent streaming."""

from __future__ import annotations

import os
import threading
import uuid
from typing import Dict, List, Optional

from ..agents.backend import ScriptedBackend
from ..agents.pipeline import OptimizeSettings, Pipeline, PipelineConfig, restore_pipeline


class SessionError(RuntimeError):
    pass


class UnknownSession(SessionError):
    pass


class InvalidStage(SessionError):
    pass


class Session:
    """One forecasting task: pipeline, event buffer, optimization thread."""

    def __init__(self, session_id: str, pipeline: Pipeline) -> None:
        self.session_id = session_id
        self.pipeline = pipeline
        pipeline._external_sink = self._on_event
        self.events: List[dict] = list(pipeline.run.read_jsonl("events.jsonl"))
        self.lock = threading.RLock()        # serializes control endpoints
        self.event_cond = threading.Condition()
        self.worker: Optional[threading.Thread] = None
        self.worker_error: Optional[str] = None

    def _on_event(self, kind: str, record: dict) -> None:
        with self.event_cond:
            self.events.append(record)
            self.event_cond.notify_all()

    @property
    def stage(self) -> str:
        return self.pipeline.stage

    def require_stage(self, *allowed: str) -> None:
        if self.stage not in allowed:
            raise InvalidStage(
                f"operation requires stage in {allowed}, session is {self.stage!r}"
            )

    def start_optimization(self, settings: OptimizeSettings) -> None:
        with self.lock:
            if self.worker is not None and self.worker.is_alive():
                raise InvalidStage("an optimization is already running")
            self.worker_error = None

            def target() -> None:
                try:
                    self.pipeline.run_search(settings)
                except Exception as exc:  # surfaced via state + events
                    self.worker_error = f"{type(exc).__name__}: {exc}"
                    self.pipeline.fail(self.worker_error)

            self.worker = threading.Thread(target=target, daemon=True)
            self.worker.start()

    def wait_for_optimization(self, timeout: float = 300.0) -> None:
        if self.worker is not None:
            self.worker.join(timeout)

    def events_since(self, last_id: Optional[int]) -> List[dict]:
        start = 0 if last_id is None else last_id + 1
        return self.events[start:]


class SessionManager:
    def __init__(self, data_dir: str, backend_factory=None) -> None:
        self.data_dir = data_dir
        os.makedirs(data_dir, exist_ok=True)
        self.backend_factory = backend_factory or (lambda: ScriptedBackend())
        self.sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()
        self._rehydrate()

    def _rehydrate(self) -> None:
        """Reload sessions persisted under the data directory."""
        for entry in sorted(os.listdir(self.data_dir)):
            run_dir = os.path.join(self.data_dir, entry)
            if not os.path.isdir(run_dir):
                continue
            if not os.path.exists(os.path.join(run_dir, "config.json")):
                continue
            pipeline = restore_pipeline(run_dir, backend=self.backend_factory())
            self.sessions[entry] = Session(entry, pipeline)

    def create(self, config: Optional[PipelineConfig] = None) -> Session:
        with self._lock:
            session_id = uuid.uuid4().hex[:12]
            run_dir = os.path.join(self.data_dir, session_id)
            pipeline = Pipeline(run_dir, backend=self.backend_factory(), config=config)
            session = Session(session_id, pipeline)
            self.sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(f"unknown session {session_id!r}")

"""Shared wiring: one AppContext drives both the HTTP API and the CLI."""

from __future__ import annotations

import logging
import secrets
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .config import AppConfig
from .errors import InvalidOverride, SessionNotFound
from .gateway import Cassette, HttpTransport, LlmGateway, ProviderMode
from .orchestrator import (Attachment, Orchestrator, SessionTranscript,
                           TranscriptStore, Turn)
from .retrieval import KnowledgeIndex
from .sandbox import ExecutionService, Ns3Backend, StubBackend
from .util import LogicalClock, SystemClock

logger = logging.getLogger(__name__)

# Session override keys accepted by create_session.
OVERRIDE_ALLOWLIST = {
    "provider_mode": {"live", "replay", "record"},
    "backend": {"stub", "ns3"},
    "generation_mode": {"scaffold_only", "llm_refine"},
}


@dataclass(frozen=True)
class ApiSession:
    session_id: str
    created_at: float
    provider_mode: str
    backend: str
    generation_mode: str

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "provider_mode": self.provider_mode,
            "backend": self.backend,
            "generation_mode": self.generation_mode,
        }


def packaged_corpus_dir() -> Path:
    return Path(str(resources.files("genonet") / "data" / "corpus"))


def packaged_fixture_dir() -> Path:
    return Path(str(resources.files("genonet") / "data" / "fixtures"))


def build_gateway(config: AppConfig, transport=None) -> LlmGateway | None:
    """Gateway per configured provider mode; replay without a cassette
    yields no gateway (rule-based paths still work)."""
    mode = ProviderMode(config.provider_mode)
    cassette = None
    if config.cassette_path:
        cassette = Cassette(config.cassette_path,
                            read_only=(mode is ProviderMode.REPLAY))
    if mode is ProviderMode.REPLAY and cassette is None:
        logger.warning("replay mode without a cassette: model-backed chains "
                       "will be unavailable")
        return None
    if transport is None and mode in (ProviderMode.LIVE, ProviderMode.RECORD):
        transport = HttpTransport(config.llm_api_base, config.llm_api_key,
                                  timeout_s=config.llm_timeout_s)
    return LlmGateway(mode=mode, cassette=cassette, transport=transport)


def build_index(config: AppConfig) -> KnowledgeIndex:
    index = KnowledgeIndex()
    corpus = Path(config.corpus_dir) if config.corpus_dir \
        else packaged_corpus_dir()
    if corpus.is_dir():
        index.ingest_directory(corpus)
    return index


def build_execution(config: AppConfig, clock=None) -> ExecutionService:
    stub = StubBackend(packaged_fixture_dir())
    if config.sandbox_dir:
        extra = Path(config.sandbox_dir) / "fixtures"
        if extra.is_dir():
            stub.load_directory(extra)
    ns3 = Ns3Backend(config.ns3_root)
    return ExecutionService(stub=stub, ns3=ns3,
                            workdir_root=config.sandbox_dir,
                            max_sandboxes=config.max_sandboxes,
                            clock=clock)


class AppContext:
    """Service state: config, agents, session registry, persistence."""

    def __init__(self, config: AppConfig | None = None, transport=None,
                 clock=None, deterministic: bool = False):
        self.config = config or AppConfig.from_env()
        self.clock = clock or (LogicalClock() if deterministic
                               else SystemClock())
        self.gateway = build_gateway(self.config, transport=transport)
        self.index = build_index(self.config)
        self.execution = build_execution(self.config, clock=self.clock)
        self.orchestrator = Orchestrator(self.gateway, self.index,
                                         self.execution, self.config,
                                         clock=self.clock)
        self.store = TranscriptStore(self.config.state_dir)
        self._sessions: dict[str, ApiSession] = {}
        self._transcripts: dict[str, SessionTranscript] = {}
        self._registry_lock = threading.Lock()
        self._restore_sessions()

    def _restore_sessions(self) -> None:
        for session_id in self.store.list_sessions():
            meta = self.store.meta(session_id)
            self._sessions[session_id] = ApiSession(**meta)
            self._transcripts[session_id] = self.store.load(session_id)

    # -- sessions -------------------------------------------------------------

    def create_session(self, overrides: dict | None = None) -> ApiSession:
        overrides = overrides or {}
        for key, value in overrides.items():
            allowed = OVERRIDE_ALLOWLIST.get(key)
            if allowed is None:
                raise InvalidOverride(key, "unknown override key")
            if value not in allowed:
                raise InvalidOverride(
                    key, f"value {value!r} not in {sorted(allowed)}")
        session = ApiSession(
            session_id=secrets.token_urlsafe(16),
            created_at=self.clock.now(),
            provider_mode=overrides.get("provider_mode",
                                        self.config.provider_mode),
            backend=overrides.get("backend", self.config.executor_backend),
            generation_mode=overrides.get("generation_mode",
                                          self.config.generation_mode),
        )
        with self._registry_lock:
            self._sessions[session.session_id] = session
            self._transcripts[session.session_id] = SessionTranscript(
                session.session_id)
        self.store.create(session.session_id, session.to_dict())
        return session

    def get_session(self, session_id: str) -> ApiSession:
        session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    def get_transcript(self, session_id: str) -> SessionTranscript:
        self.get_session(session_id)
        return self._transcripts[session_id]

    # -- turns ----------------------------------------------------------------

    def post_message(self, session_id: str, text: str,
                     attachments: list[Attachment] | None = None,
                     progress=None) -> Turn:
        session = self.get_session(session_id)
        transcript = self._transcripts[session_id]
        orchestrator = self._orchestrator_for(session)
        return orchestrator.handle_turn(transcript, text,
                                        attachments=attachments,
                                        store=self.store, progress=progress)

    def _orchestrator_for(self, session: ApiSession) -> Orchestrator:
        """Session mode flags are immutable; reuse the shared orchestrator
        unless the session overrides config-level behavior."""
        cfg = self.config
        if (session.backend == cfg.executor_backend
                and session.generation_mode == cfg.generation_mode
                and session.provider_mode == cfg.provider_mode):
            return self.orchestrator
        from dataclasses import replace
        session_cfg = replace(cfg, executor_backend=session.backend,
                              generation_mode=session.generation_mode,
                              provider_mode=session.provider_mode)
        return Orchestrator(self.gateway, self.index, self.execution,
                            session_cfg, clock=self.clock)


__all__ = [
    "ApiSession", "AppContext", "OVERRIDE_ALLOWLIST", "build_execution",
    "build_gateway", "build_index", "packaged_corpus_dir",
    "packaged_fixture_dir",
]

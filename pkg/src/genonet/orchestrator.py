"""Per-turn chain engine: routing, agent chains, and session memory.

Each user turn is classified by a data-driven keyword ruleset (falling
back to one temperature-0 gateway call), then driven through the fixed
chain for its route.  Every intermediate - route decision, retrieved
chunks, extracted spec, artifacts, execution reports, interpretation -
is appended atomically to the session transcript, which persists as an
append-only record file and round-trips byte-identically.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import schemas
from .codegen import GeneratedArtifact, generate_script, lint_structure
from .config import AppConfig
from .errors import BuildFailed, EmptyIndex, GenonetError, TurnFailed
from .extraction import extract_intent, merge_and_default
from .gateway import LlmGateway, LlmRequest, Message, parse_structured
from .interpreter import (compute_metrics, parse_event_log, parse_flowmonitor,
                          summarize)
from .retrieval import KnowledgeIndex, RankedHit
from .sandbox import DebugOutcome, ExecutionService
from .util import canonical_json, count_tokens, sha256_hex

logger = logging.getLogger(__name__)

ROUTES = ("GeneralQuery", "GenerateCpp", "GeneratePython", "Execute",
          "Interpret", "Debug")

DEFAULT_CONTEXT_TURNS = 6
CONTEXT_TOKEN_BUDGET = 2048

ANSWER_SYSTEM_PROMPT = (
    "You are a network-simulation assistant for 5G/6G scenarios built on "
    "ns-3. Answer concisely and factually; cite the provided context when "
    "it is relevant."
)

ROUTER_SYSTEM_PROMPT = (
    "Classify the user message into exactly one route: GeneralQuery, "
    "GenerateCpp, GeneratePython, Execute, Interpret, or Debug. Reply "
    "with JSON {\"route\": ..., \"confidence\": ..., \"rationale\": ...}."
)


@dataclass(frozen=True)
class RouteDecision:
    route: str
    confidence: float
    rationale: str
    decided_by: str  # keyword | llm

    def to_dict(self) -> dict:
        return {"route": self.route, "confidence": self.confidence,
                "rationale": self.rationale, "decided_by": self.decided_by}


@dataclass(frozen=True)
class Attachment:
    name: str
    content: str

    def to_dict(self) -> dict:
        return {"name": self.name, "content": self.content,
                "sha256": sha256_hex(self.content)}


@dataclass
class Turn:
    ordinal: int
    user_message: str
    attachments: list = field(default_factory=list)
    route: RouteDecision | None = None
    retrieved: list = field(default_factory=list)  # RankedHit dicts
    spec: dict | None = None
    spec_provenance: dict | None = None
    extraction_flags: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)  # GeneratedArtifact dicts
    structure_report: dict | None = None
    reports: list = field(default_factory=list)  # ExecutionReport dicts
    debug: dict | None = None
    interpretation: dict | None = None
    reply: str = ""
    error: dict | None = None
    created_at: float = 0.0

    def to_dict(self) -> dict:
        return {
            "ordinal": self.ordinal,
            "user_message": self.user_message,
            "attachments": self.attachments,
            "route": self.route.to_dict() if self.route else None,
            "retrieved": self.retrieved,
            "spec": self.spec,
            "spec_provenance": self.spec_provenance,
            "extraction_flags": self.extraction_flags,
            "artifacts": self.artifacts,
            "structure_report": self.structure_report,
            "reports": self.reports,
            "debug": self.debug,
            "interpretation": self.interpretation,
            "reply": self.reply,
            "error": self.error,
            "created_at": self.created_at,
        }


class SessionTranscript:
    """Append-only ordered record of turns for one chat session."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self.turns: list[Turn] = []

    def append(self, turn: Turn) -> None:
        expected = len(self.turns) + 1
        if turn.ordinal != expected:
            raise ValueError(f"turn ordinal {turn.ordinal} breaks density "
                             f"(expected {expected})")
        self.turns.append(turn)

    def last_artifact(self) -> GeneratedArtifact | None:
        """Most recent generated artifact; raises TurnFailed on a tie."""
        for turn in reversed(self.turns):
            if turn.artifacts:
                if len(turn.artifacts) > 1:
                    raise TurnFailed(
                        "multiple artifacts tie on recency; name one explicitly")
                return GeneratedArtifact.from_dict(turn.artifacts[0])
        return None

    def to_dict(self) -> dict:
        return {"session_id": self.session_id,
                "turns": [t.to_dict() for t in self.turns]}


def strip_volatile(value):
    """Deep-copy a transcript structure without volatile bookkeeping
    (timestamps); used for the replay-stable digest."""
    if isinstance(value, dict):
        return {k: strip_volatile(v) for k, v in value.items()
                if k not in ("created_at",)}
    if isinstance(value, list):
        return [strip_volatile(v) for v in value]
    return value


def transcript_digest(transcript: SessionTranscript) -> str:
    """Digest of the transcript content: the ordered turns with volatile
    bookkeeping stripped.  The random session id is identity, not content,
    so two sessions over the same inputs digest identically."""
    turns = [strip_volatile(t.to_dict()) for t in transcript.turns]
    return sha256_hex(canonical_json(turns))


class TranscriptStore:
    """One append-only JSONL record file per session."""

    def __init__(self, state_dir: str | Path):
        self.root = Path(state_dir) / "sessions"
        self.root.mkdir(parents=True, exist_ok=True)

    def _session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def create(self, session_id: str, meta: dict) -> None:
        session_dir = self._session_dir(session_id)
        session_dir.mkdir(parents=True, exist_ok=True)
        (session_dir / "meta.json").write_text(canonical_json(meta), "utf-8")

    def exists(self, session_id: str) -> bool:
        return (self._session_dir(session_id) / "meta.json").exists()

    def meta(self, session_id: str) -> dict:
        return json.loads(
            (self._session_dir(session_id) / "meta.json").read_text("utf-8"))

    def list_sessions(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def append_turn(self, session_id: str, turn: Turn) -> None:
        path = self._session_dir(session_id) / "transcript.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(canonical_json(turn.to_dict()) + "\n")
            fh.flush()

    def load(self, session_id: str) -> SessionTranscript:
        transcript = SessionTranscript(session_id)
        path = self._session_dir(session_id) / "transcript.jsonl"
        if not path.exists():
            return transcript
        for line in path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            turn = Turn(ordinal=data["ordinal"],
                        user_message=data["user_message"])
            turn.attachments = data.get("attachments", [])
            route = data.get("route")
            if route:
                turn.route = RouteDecision(**route)
            turn.retrieved = data.get("retrieved", [])
            turn.spec = data.get("spec")
            turn.spec_provenance = data.get("spec_provenance")
            turn.extraction_flags = data.get("extraction_flags", [])
            turn.artifacts = data.get("artifacts", [])
            turn.structure_report = data.get("structure_report")
            turn.reports = data.get("reports", [])
            turn.debug = data.get("debug")
            turn.interpretation = data.get("interpretation")
            turn.reply = data.get("reply", "")
            turn.error = data.get("error")
            turn.created_at = data.get("created_at", 0.0)
            transcript.append(turn)
        return transcript


def _load_routing_rules() -> list[dict]:
    payload = json.loads((resources.files("genonet") / "data"
                          / "routing_rules.json").read_text("utf-8"))
    return payload["rules"]


_ROUTING_RULES = _load_routing_rules()
_PY_DIALECT_RE = re.compile(r"\bpython\b", re.IGNORECASE)
_CPP_DIALECT_RE = re.compile(r"\b(?:c\+\+|cpp)\b", re.IGNORECASE)


def route(message: str, session: SessionTranscript,
          attachments: list[Attachment] | None = None,
          gateway: LlmGateway | None = None,
          model_id: str = "default") -> RouteDecision:
    """Keyword ruleset first (deterministic); otherwise one temperature-0
    gateway classification call."""
    if not message.strip():
        raise ValueError("message must be non-empty")
    has_attachment = bool(attachments)
    for rule in _ROUTING_RULES:
        if rule.get("requires_attachment") and not has_attachment:
            continue
        if rule.get("requires_attachment") and has_attachment:
            return RouteDecision(route=rule["route"], confidence=1.0,
                                 rationale=rule["rationale"],
                                 decided_by="keyword")
        any_patterns = rule.get("any", [])
        if any_patterns and not any(re.search(p, message, re.IGNORECASE)
                                    for p in any_patterns):
            continue
        all_patterns = rule.get("all", [])
        if all_patterns and not all(re.search(p, message, re.IGNORECASE)
                                    for p in all_patterns):
            continue
        if not any_patterns and not all_patterns \
                and not rule.get("requires_attachment"):
            continue
        chosen = rule["route"]
        if chosen == "Generate":
            chosen = ("GeneratePython" if _PY_DIALECT_RE.search(message)
                      and not _CPP_DIALECT_RE.search(message)
                      else "GenerateCpp")
        return RouteDecision(route=chosen, confidence=1.0,
                             rationale=rule["rationale"],
                             decided_by="keyword")

    if gateway is None:
        return RouteDecision(route="GeneralQuery", confidence=0.5,
                             rationale="no rule fired; no classifier available",
                             decided_by="keyword")
    request = LlmRequest(
        messages=(Message("system", ROUTER_SYSTEM_PROMPT),
                  Message("user", message)),
        model_id=model_id, temperature=0.0,
        structured_output_contract=schemas.ROUTE_DECISION_V1)
    response = gateway.complete(request)
    data = parse_structured(response.text, schemas.ROUTE_DECISION_V1)
    return RouteDecision(route=data["route"],
                         confidence=float(data["confidence"]),
                         rationale=data.get("rationale", ""),
                         decided_by="llm")


def render_context(session: SessionTranscript, k: int,
                   token_budget: int = CONTEXT_TOKEN_BUDGET) -> str:
    """Deterministic rendering of the last k turns, oldest first; user
    message and final reply only, bounded by the token budget."""
    if k < 0:
        raise ValueError("k must be >= 0")
    turns = session.turns[-k:] if k > 0 else []
    while turns:
        lines = []
        for turn in turns:
            lines.append(f"User: {turn.user_message}")
            lines.append(f"Assistant: {turn.reply}")
        text = "\n".join(lines)
        if count_tokens(text) <= token_budget:
            return text
        turns = turns[1:]
    return ""


class Orchestrator:
    """Drives agent chains over shared gateway/index/executor services."""

    def __init__(self, gateway: LlmGateway | None, index: KnowledgeIndex,
                 execution: ExecutionService, config: AppConfig | None = None,
                 clock=None):
        self.gateway = gateway
        self.index = index
        self.execution = execution
        self.config = config or AppConfig()
        self._clock = clock
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _now(self) -> float:
        return self._clock.now() if self._clock is not None else time.time()

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- chains ---------------------------------------------------------------

    def _retrieve(self, message: str, turn: Turn) -> list[RankedHit]:
        try:
            hits = self.index.query(message, self.config.retrieval_k)
        except EmptyIndex:
            return []
        turn.retrieved = [{"chunk_id": h.chunk_id, "score": h.score,
                           "rank": h.rank} for h in hits]
        return hits

    def _chain_general(self, session: SessionTranscript, turn: Turn,
                       progress) -> None:
        if self.gateway is None:
            raise TurnFailed("no model access configured: set a cassette "
                             "(replay) or an API endpoint (live)")
        progress("retrieving")
        hits = self._retrieve(turn.user_message, turn)
        history = render_context(session, self.config.context_turns)
        base = turn.user_message
        if history:
            base = f"Conversation so far:\n{history}\n\nQuestion:\n{base}"
        prompt = self.index.augment_prompt(base, hits)
        progress("answering")
        request = LlmRequest(
            messages=(Message("system", ANSWER_SYSTEM_PROMPT),
                      Message("user", prompt)),
            model_id=self.config.llm_model, temperature=0.0)
        turn.reply = self.gateway.complete(request).text

    def _chain_generate(self, session: SessionTranscript, turn: Turn,
                        dialect: str, progress) -> None:
        progress("retrieving")
        hits = self._retrieve(turn.user_message, turn)
        context = tuple(self.index.get_chunk(h.chunk_id).text for h in hits)
        progress("generating")
        partial = extract_intent(turn.user_message, context=context,
                                 gateway=self.gateway,
                                 model_id=self.config.llm_model)
        result = merge_and_default(partial)
        turn.spec = result.spec.to_dict()
        turn.spec_provenance = dict(result.provenance)
        turn.extraction_flags = list(result.flags)
        artifact = generate_script(result.spec, dialect,
                                   mode=self.config.generation_mode,
                                   gateway=self.gateway,
                                   created_at=self._now(),
                                   model_id=self.config.llm_model)
        report = lint_structure(artifact)
        turn.artifacts = [artifact.to_dict()]
        turn.structure_report = report.to_dict()
        passed = sum(1 for c in report.checks if c.passed)
        flags = (f" Cross-check flagged fields: "
                 f"{', '.join(sorted(set(turn.extraction_flags)))}."
                 if turn.extraction_flags else "")
        turn.reply = (
            f"Generated a {dialect} ns-3 simulation script for the extracted "
            f"scenario (digest {artifact.spec_digest[:12]}). Structure "
            f"checks: {passed}/{len(report.checks)} passed.{flags}")

    def _resolve_execute_target(self, message: str,
                                session: SessionTranscript):
        stub = self.execution.backends.get("stub")
        if stub is not None:
            lowered = message.lower()
            for ref in sorted(stub.known_examples(), key=len, reverse=True):
                if ref.lower() in lowered:
                    return ref
        artifact = session.last_artifact()
        if artifact is None:
            raise TurnFailed("nothing to execute: no prior artifact in this "
                             "session and no known example named")
        return artifact

    def _interpret_reports(self, turn: Turn, reports: list) -> None:
        """Derive metrics/timeline from a run's outputs and set the reply."""
        summaries = []
        for report in reports:
            for art in report.artifacts:
                if not art.name.endswith(".xml"):
                    continue
                records = parse_flowmonitor(art.read_text())
                metrics = [compute_metrics(r) for r in records]
                if metrics:
                    turn.interpretation = {
                        "kind": "metrics",
                        "metrics": [m.to_dict() for m in metrics],
                        "summary": summarize(metrics=metrics),
                    }
                    summaries.append(turn.interpretation["summary"])
            if not summaries and report.stdout:
                parsed = parse_event_log(report.stdout)
                if parsed.events:
                    turn.interpretation = {
                        "kind": "timeline",
                        "timeline": [e.to_dict() for e in parsed.events],
                        "skipped_lines": parsed.skipped_lines,
                        "summary": summarize(parsed_log=parsed),
                    }
                    summaries.append(turn.interpretation["summary"])
        if summaries:
            turn.reply = "\n\n".join(summaries)

    def _chain_execute(self, session: SessionTranscript, turn: Turn,
                       progress) -> None:
        progress("executing")
        target = self._resolve_execute_target(turn.user_message, session)
        backend = self.config.executor_backend
        try:
            report = self.execution.execute(target, backend=backend)
            reports = [report]
        except BuildFailed as failure:
            if isinstance(target, GeneratedArtifact) and self.gateway:
                outcome = self.execution.debug_loop(
                    target, backend=backend, gateway=self.gateway,
                    model_id=self.config.llm_model)
                turn.debug = _debug_to_dict(outcome)
                reports = [rec.report for rec in outcome.attempts]
            else:
                turn.reports = [failure.report.to_dict()]
                raise TurnFailed("build failed and no repair path is "
                                 "available", failure) from failure
        turn.reports = [r.to_dict() for r in reports]
        progress("interpreting")
        self._interpret_reports(turn, reports)
        if not turn.reply:
            last = reports[-1]
            turn.reply = (f"Execution finished: phase {last.phase}, exit "
                          f"status {last.exit_status} "
                          f"({last.backend} backend).")

    def _chain_interpret(self, session: SessionTranscript, turn: Turn,
                         progress) -> None:
        progress("interpreting")
        if turn.attachments:
            content = turn.attachments[0]["content"]
        else:
            content = _last_xml_artifact(session)
            if content is None:
                raise TurnFailed("nothing to interpret: attach simulator "
                                 "output or execute a scenario first")
        stripped = content.lstrip()
        if stripped.startswith("<"):
            records = parse_flowmonitor(content)
            metrics = [compute_metrics(r) for r in records]
            turn.interpretation = {
                "kind": "metrics",
                "metrics": [m.to_dict() for m in metrics],
                "summary": summarize(metrics=metrics),
            }
        else:
            parsed = parse_event_log(content)
            if not parsed.events:
                raise TurnFailed("no recognizable flow records or events in "
                                 "the provided output")
            turn.interpretation = {
                "kind": "timeline",
                "timeline": [e.to_dict() for e in parsed.events],
                "skipped_lines": parsed.skipped_lines,
                "summary": summarize(parsed_log=parsed),
            }
        turn.reply = turn.interpretation["summary"]

    def _chain_debug(self, session: SessionTranscript, turn: Turn,
                     progress) -> None:
        progress("executing")
        artifact = session.last_artifact()
        if artifact is None:
            raise TurnFailed("nothing to debug: generate a script first")
        outcome = self.execution.debug_loop(
            artifact, backend=self.config.executor_backend,
            gateway=self.gateway, model_id=self.config.llm_model)
        turn.debug = _debug_to_dict(outcome)
        turn.reports = [rec.report.to_dict() for rec in outcome.attempts]
        state = "resolved" if outcome.resolved else "not resolved"
        turn.reply = (f"Debug loop {state} after {len(outcome.attempts)} "
                      f"attempt{'s' if len(outcome.attempts) != 1 else ''}.")

    # -- public API -----------------------------------------------------------

    def route(self, message: str, session: SessionTranscript,
              attachments: list[Attachment] | None = None) -> RouteDecision:
        return route(message, session, attachments=attachments,
                     gateway=self.gateway, model_id=self.config.llm_model)

    def handle_turn(self, session: SessionTranscript, message: str,
                    attachments: list[Attachment] | None = None,
                    store: TranscriptStore | None = None,
                    progress=None) -> Turn:
        """Run one turn's chain; the turn (including partial failures) is
        appended atomically and the session stays usable afterward."""
        callback = progress or (lambda stage, **info: None)
        lock = self._session_lock(session.session_id)
        with lock:
            turn = Turn(ordinal=len(session.turns) + 1, user_message=message,
                        created_at=self._now())
            turn.attachments = [a.to_dict() for a in (attachments or [])]
            try:
                decision = self.route(message, session, attachments)
                turn.route = decision
                callback("routed", route=decision.route)
                if decision.route == "GeneralQuery":
                    self._chain_general(session, turn, callback)
                elif decision.route in ("GenerateCpp", "GeneratePython"):
                    dialect = ("cpp" if decision.route == "GenerateCpp"
                               else "python")
                    self._chain_generate(session, turn, dialect, callback)
                elif decision.route == "Execute":
                    self._chain_execute(session, turn, callback)
                elif decision.route == "Interpret":
                    self._chain_interpret(session, turn, callback)
                elif decision.route == "Debug":
                    self._chain_debug(session, turn, callback)
                else:
                    raise TurnFailed(f"unknown route {decision.route!r}")
            except GenonetError as exc:
                logger.warning("turn %d failed: %s", turn.ordinal, exc)
                turn.error = {"code": exc.code, "message": str(exc)}
                if not turn.reply:
                    turn.reply = f"The request could not be completed: {exc}"
            session.append(turn)
            if store is not None:
                store.append_turn(session.session_id, turn)
            callback("reply", ordinal=turn.ordinal)
            return turn

    def render_context(self, session: SessionTranscript,
                       k: int | None = None) -> str:
        return render_context(session,
                              self.config.context_turns if k is None else k)


def _debug_to_dict(outcome: DebugOutcome) -> dict:
    return {
        "resolved": outcome.resolved,
        "attempts": [
            {"report": rec.report.to_dict(), "repair_prompt": rec.repair_prompt}
            for rec in outcome.attempts
        ],
        "final_artifact": outcome.final_artifact.to_dict(),
    }


def _last_xml_artifact(session: SessionTranscript) -> str | None:
    for turn in reversed(session.turns):
        for report in reversed(turn.reports):
            for art in reversed(report.get("artifacts", [])):
                if art.get("name", "").endswith(".xml") and "content" in art:
                    return art["content"]
    return None


__all__ = [
    "Attachment", "Orchestrator", "RouteDecision", "SessionTranscript",
    "TranscriptStore", "Turn", "render_context", "route", "strip_volatile",
    "transcript_digest",
]

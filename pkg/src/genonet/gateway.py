"""Single choke point for model calls: live HTTP, replay, and record modes.

Every agent in the pipeline calls ``LlmGateway.complete``.  Replay mode
serves responses from a cassette keyed by a request digest, which makes
the whole workbench deterministic and offline-testable; record mode does
a live call and appends the result to the cassette.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import jsonschema

from .errors import CassetteMiss, ContractViolation, TransportError
from .util import canonical_json, collapse_ws, sha256_hex

logger = logging.getLogger(__name__)


class ProviderMode(str, Enum):
    LIVE = "live"
    REPLAY = "replay"
    RECORD = "record"


class FinishReason(str, Enum):
    STOP = "stop"
    LENGTH = "length"
    ERROR = "error"


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class LlmRequest:
    messages: tuple[Message, ...]
    model_id: str = "default"
    temperature: float = 0.0
    max_tokens: int = 2048
    structured_output_contract: str | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("message list must be non-empty")
        if self.messages[0].role != "system":
            raise ValueError("first message must be system-role")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.structured_output_contract and self.temperature != 0.0:
            raise ValueError("structured-output requests must use temperature 0")

    def with_messages(self, messages: tuple[Message, ...]) -> "LlmRequest":
        return LlmRequest(messages=messages, model_id=self.model_id,
                          temperature=self.temperature, max_tokens=self.max_tokens,
                          structured_output_contract=self.structured_output_contract)


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class LlmResponse:
    text: str
    finish_reason: FinishReason = FinishReason.STOP
    usage: Usage = field(default_factory=Usage)
    provenance: str = "live"  # live | replay


def normalize_request(req: LlmRequest) -> str:
    """Digest over a canonical request serialization.

    Whitespace runs in message text are collapsed so formatting-only
    differences replay to the same recorded response.  Volatile metadata
    (timestamps, session ids) never enters the request type, so nothing
    else needs stripping.
    """
    payload = {
        "model_id": req.model_id,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
        "contract": req.structured_output_contract,
        "messages": [
            {"role": m.role, "content": collapse_ws(m.content)} for m in req.messages
        ],
    }
    return sha256_hex(canonical_json(payload))


class Cassette:
    """Recorded request-digest -> response store, one JSON record per line.

    Append-only in record mode; read-only in replay mode.  Appends are
    serialized through a single writer lock; lookups are lock-free reads
    of an immutable-once-loaded dict.
    """

    def __init__(self, path: str | Path, read_only: bool = False):
        self.path = Path(path)
        self.read_only = read_only
        self._entries: dict[str, dict] = {}
        self._write_lock = threading.Lock()
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._entries[record["digest"]] = record

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, digest: str) -> bool:
        return digest in self._entries

    def lookup(self, digest: str) -> LlmResponse | None:
        record = self._entries.get(digest)
        if record is None:
            return None
        resp = record["response"]
        return LlmResponse(
            text=resp["text"],
            finish_reason=FinishReason(resp.get("finish_reason", "stop")),
            usage=Usage(**resp.get("usage", {})),
            provenance="replay",
        )

    def append(self, digest: str, req: LlmRequest, response: LlmResponse) -> None:
        if self.read_only:
            raise PermissionError("cassette opened read-only")
        record = {
            "digest": digest,
            "request": {
                "model_id": req.model_id,
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
                "contract": req.structured_output_contract,
                "messages": [{"role": m.role, "content": m.content}
                             for m in req.messages],
            },
            "response": {
                "text": response.text,
                "finish_reason": response.finish_reason.value,
                "usage": {"prompt_tokens": response.usage.prompt_tokens,
                          "completion_tokens": response.usage.completion_tokens},
            },
        }
        with self._write_lock:
            self._entries[digest] = record
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(canonical_json(record) + "\n")


class HttpTransport:
    """OpenAI-compatible chat-completions round trip (bearer-token auth)."""

    def __init__(self, base_url: str, api_key: str = "", timeout_s: float = 30.0,
                 max_retries: int = 1):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.max_retries = max_retries

    def send(self, req: LlmRequest) -> LlmResponse:
        import httpx

        payload = {
            "model": req.model_id,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "messages": [{"role": m.role, "content": m.content}
                         for m in req.messages],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                response = httpx.post(f"{self.base_url}/chat/completions",
                                      json=payload, headers=headers,
                                      timeout=self.timeout_s)
                response.raise_for_status()
                body = response.json()
                choice = body["choices"][0]
                usage = body.get("usage", {})
                return LlmResponse(
                    text=choice["message"]["content"],
                    finish_reason=FinishReason(choice.get("finish_reason", "stop")),
                    usage=Usage(prompt_tokens=usage.get("prompt_tokens", 0),
                                completion_tokens=usage.get("completion_tokens", 0)),
                    provenance="live",
                )
            except Exception as exc:  # noqa: BLE001 - all transport faults surface the same way
                last_error = exc
                logger.warning("transport attempt %d failed: %s", attempt + 1, exc)
        raise TransportError(str(last_error), retries=self.max_retries)


class CannedTransport:
    """Deterministic scripted transport for record runs and tests.

    Rules are (predicate, text) pairs tried in order against the request;
    the first hit wins.  Counts every send so tests can assert round trips.
    """

    def __init__(self, rules=None, default_text: str = ""):
        self.rules = list(rules or [])
        self.default_text = default_text
        self.calls: list[LlmRequest] = []

    def add_rule(self, predicate, text: str) -> None:
        self.rules.append((predicate, text))

    def send(self, req: LlmRequest) -> LlmResponse:
        self.calls.append(req)
        for predicate, text in self.rules:
            if predicate(req):
                return LlmResponse(text=text, provenance="live")
        if self.default_text:
            return LlmResponse(text=self.default_text, provenance="live")
        raise TransportError("no canned rule matched request")


# --- structured output contracts ---------------------------------------------

_SCHEMAS: dict[str, dict] = {}


def register_schema(contract_id: str, schema: dict) -> None:
    _SCHEMAS[contract_id] = schema


def get_schema(contract_id: str) -> dict:
    return _SCHEMAS[contract_id]


_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_-]*\s*|\s*```$", re.MULTILINE)


def parse_structured(text: str, contract_id: str):
    """Parse and schema-validate model output for a named contract.

    Strips markdown fences before parsing.  Raises ValueError with the
    validator's message so the gateway can build a repair prompt.
    """
    stripped = _FENCE_RE.sub("", text.strip()).strip()
    try:
        data = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise ValueError(f"response is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, _SCHEMAS[contract_id])
    except jsonschema.ValidationError as exc:
        raise ValueError(f"schema validation failed: {exc.message}") from exc
    return data


class LlmGateway:
    """Provider abstraction with live, replay, and record modes."""

    def __init__(self, mode: ProviderMode | str = ProviderMode.REPLAY,
                 cassette: Cassette | None = None, transport=None):
        self.mode = ProviderMode(mode)
        self.cassette = cassette
        self.transport = transport
        if self.mode in (ProviderMode.REPLAY, ProviderMode.RECORD) and cassette is None:
            raise ValueError(f"{self.mode.value} mode requires a cassette")
        if self.mode is ProviderMode.REPLAY and cassette is not None:
            cassette.read_only = True

    def complete(self, req: LlmRequest) -> LlmResponse:
        """One model call under the gateway's mode.

        replay: cassette entry for the request digest, no network.
        live:   one HTTP round trip.
        record: serve from cassette when present, else live call + append.
        """
        response = self._complete_raw(req)
        if req.structured_output_contract:
            response = self._enforce_contract(req, response)
        return response

    def _complete_raw(self, req: LlmRequest) -> LlmResponse:
        digest = normalize_request(req)
        if self.mode is ProviderMode.REPLAY:
            found = self.cassette.lookup(digest)
            if found is None:
                raise CassetteMiss(digest)
            return found
        if self.mode is ProviderMode.RECORD:
            found = self.cassette.lookup(digest)
            if found is not None:
                return found
            response = self._send_live(req)
            self.cassette.append(digest, req, response)
            return response
        return self._send_live(req)

    def _send_live(self, req: LlmRequest) -> LlmResponse:
        if self.transport is None:
            raise TransportError("no transport configured for live calls")
        return self.transport.send(req)

    def _enforce_contract(self, req: LlmRequest, response: LlmResponse) -> LlmResponse:
        contract = req.structured_output_contract
        try:
            parse_structured(response.text, contract)
            return response
        except ValueError as exc:
            first_error = str(exc)
        # Exactly one automatic repair attempt: re-prompt with the
        # validator's message appended, then fail.
        logger.info("contract %s violated, attempting repair: %s", contract, first_error)
        repair_req = req.with_messages(req.messages + (
            Message("assistant", response.text),
            Message("user",
                    f"The previous reply failed validation: {first_error}\n"
                    f"Return only corrected JSON conforming to contract "
                    f"{contract!r}."),
        ))
        repaired = self._complete_raw(repair_req)
        try:
            parse_structured(repaired.text, contract)
            return repaired
        except ValueError as exc:
            raise ContractViolation(contract, str(exc)) from exc


__all__ = [
    "CannedTransport", "Cassette", "FinishReason", "HttpTransport",
    "LlmGateway", "LlmRequest", "LlmResponse", "Message", "ProviderMode",
    "Usage", "get_schema", "normalize_request", "parse_structured",
    "register_schema",
]

"""HTTP API over the orchestrator: sessions, SSE-streamed turns, transcripts.

Endpoints: POST /sessions, POST /sessions/{id}/messages (server-sent
events at stage granularity, terminated by one ``turn`` event carrying
the full turn), GET /sessions/{id}/transcript, GET /health.  Error
bodies are ``{code, message}``.  A single shared bearer token
(GENONET_AUTH_TOKEN) guards everything except /health when configured.
"""

from __future__ import annotations

import json
import logging
import queue
import threading

from fastapi import Depends, FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import __version__
from .errors import GenonetError
from .orchestrator import Attachment, transcript_digest
from .runtime import AppContext
from .util import canonical_json

logger = logging.getLogger(__name__)

_STATUS_BY_CODE = {
    "session-not-found": 404,
    "invalid-override": 400,
    "payload-too-large": 413,
    "unauthorized": 401,
}


class _Unauthorized(GenonetError):
    code = "unauthorized"


class AttachmentBody(BaseModel):
    name: str
    content: str


class MessageBody(BaseModel):
    text: str = Field(min_length=1)
    attachments: list[AttachmentBody] = Field(default_factory=list)


class SessionBody(BaseModel):
    overrides: dict = Field(default_factory=dict)


def _error_response(exc: GenonetError) -> JSONResponse:
    status = _STATUS_BY_CODE.get(exc.code, 500)
    return JSONResponse(status_code=status,
                        content={"code": exc.code, "message": str(exc)})


def _sse(event: str, payload: dict) -> str:
    return f"event: {event}\ndata: {canonical_json(payload)}\n\n"


def create_app(context: AppContext | None = None) -> FastAPI:
    context = context or AppContext()
    app = FastAPI(title="genonet", version=__version__)
    app.state.context = context

    async def check_auth(request: Request):
        token = context.config.auth_token
        if not token:
            return
        supplied = request.headers.get("Authorization", "")
        if supplied != f"Bearer {token}":
            raise _Unauthorized("invalid or missing bearer token")

    @app.exception_handler(GenonetError)
    async def genonet_error_handler(_request: Request, exc: GenonetError):
        return _error_response(exc)

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__,
                "provider_mode": context.config.provider_mode,
                "backend": context.config.executor_backend}

    @app.post("/sessions", dependencies=[Depends(check_auth)])
    async def create_session(body: SessionBody):
        session = context.create_session(body.overrides)
        return session.to_dict()

    @app.get("/sessions/{session_id}/transcript",
             dependencies=[Depends(check_auth)])
    async def get_transcript(session_id: str):
        transcript = context.get_transcript(session_id)
        payload = transcript.to_dict()
        payload["digest"] = transcript_digest(transcript)
        return payload

    @app.post("/sessions/{session_id}/messages",
              dependencies=[Depends(check_auth)])
    async def post_message(session_id: str, body: MessageBody):
        context.get_session(session_id)  # 404 before the stream starts
        total = sum(len(att.content) for att in body.attachments)
        if total > context.config.attachment_cap_bytes:
            raise _PayloadTooLarge(total)
        attachments = [Attachment(att.name, att.content)
                       for att in body.attachments]
        events: queue.Queue = queue.Queue()

        def progress(stage: str, **info):
            events.put(("stage", {"stage": stage, **info}))

        def worker():
            try:
                turn = context.post_message(session_id, body.text,
                                            attachments=attachments,
                                            progress=progress)
                events.put(("turn", turn.to_dict()))
            except GenonetError as exc:
                events.put(("error", {"code": exc.code, "message": str(exc)}))
            except Exception as exc:  # noqa: BLE001 - surface, never hang the stream
                logger.exception("turn processing crashed")
                events.put(("error", {"code": "internal", "message": str(exc)}))
            finally:
                events.put(None)

        threading.Thread(target=worker, daemon=True).start()

        def stream():
            while True:
                item = events.get()
                if item is None:
                    break
                event, payload = item
                yield _sse(event, payload)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


class _PayloadTooLarge(GenonetError):
    code = "payload-too-large"

    def __init__(self, size: int):
        super().__init__(f"attachments total {size} bytes exceed the cap")


__all__ = ["create_app"]

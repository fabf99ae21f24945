"""Service configuration from environment variables."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class AppConfig:
    # model access
    llm_api_base: str = "http://localhost:8000/v1"
    llm_api_key: str = ""
    llm_model: str = "default"
    llm_timeout_s: float = 30.0
    provider_mode: str = "replay"  # live | replay | record
    cassette_path: str | None = None
    # execution
    ns3_root: str | None = None
    sandbox_dir: str | None = None
    max_sandboxes: int = 2
    executor_backend: str = "stub"  # stub | ns3
    generation_mode: str = "scaffold_only"  # scaffold_only | llm_refine
    # service
    bind_addr: str = "127.0.0.1:8470"
    auth_token: str | None = None
    state_dir: str = field(default_factory=lambda: str(
        Path(tempfile.gettempdir()) / "genonet-state"))
    corpus_dir: str | None = None
    context_turns: int = 6
    retrieval_k: int = 4
    attachment_cap_bytes: int = 4 * 1024 * 1024

    @classmethod
    def from_env(cls, env: dict | None = None) -> "AppConfig":
        env = env if env is not None else dict(os.environ)
        defaults = cls()

        def get(key: str, fallback):
            return env.get(key, fallback)

        return cls(
            llm_api_base=get("LLM_API_BASE", defaults.llm_api_base),
            llm_api_key=get("LLM_API_KEY", defaults.llm_api_key),
            llm_model=get("LLM_MODEL", defaults.llm_model),
            llm_timeout_s=float(get("LLM_TIMEOUT_S", defaults.llm_timeout_s)),
            provider_mode=get("GENONET_PROVIDER_MODE", defaults.provider_mode),
            cassette_path=get("GENONET_CASSETTE", defaults.cassette_path),
            ns3_root=get("NS3_ROOT", defaults.ns3_root),
            sandbox_dir=get("GENONET_SANDBOX_DIR", defaults.sandbox_dir),
            max_sandboxes=int(get("GENONET_MAX_SANDBOXES",
                                  defaults.max_sandboxes)),
            executor_backend=get("GENONET_BACKEND", defaults.executor_backend),
            generation_mode=get("GENONET_GENERATION_MODE",
                                defaults.generation_mode),
            bind_addr=get("GENONET_BIND_ADDR", defaults.bind_addr),
            auth_token=get("GENONET_AUTH_TOKEN", defaults.auth_token),
            state_dir=get("GENONET_STATE_DIR", defaults.state_dir),
            corpus_dir=get("GENONET_CORPUS_DIR", defaults.corpus_dir),
            context_turns=int(get("GENONET_CONTEXT_TURNS",
                                  defaults.context_turns)),
            retrieval_k=int(get("GENONET_RETRIEVAL_K", defaults.retrieval_k)),
            attachment_cap_bytes=int(get("GENONET_ATTACHMENT_CAP",
                                         defaults.attachment_cap_bytes)),
        )


__all__ = ["AppConfig"]

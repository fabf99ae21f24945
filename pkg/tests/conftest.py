"""Shared fixtures: replay cassettes recorded against canned transports."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import pytest

from genonet.config import AppConfig
from genonet.demo import build_demo_cassette
from genonet.gateway import Cassette, CannedTransport, LlmGateway, ProviderMode
from genonet.runtime import AppContext
from genonet.scenario import fig2_spec


CANONICAL_ECHO_LOG = (
    "At time +2s client sent 1024 bytes to 10.1.2.4 port 9\n"
    "At time +2.0118s server sent 1024 bytes to 10.1.3.3 port 49153\n"
    "At time +2.02161s client received 1024 bytes from 10.1.2.4 port 9\n"
)


@pytest.fixture(scope="session")
def demo_cassette(tmp_path_factory) -> Path:
    """Cassette for the scripted 4-turn demo session."""
    root = tmp_path_factory.mktemp("demo-cassette")
    return build_demo_cassette(root / "demo.jsonl", state_dir=root)


@pytest.fixture
def replay_context(demo_cassette, tmp_path):
    """Factory for replay-mode AppContexts with isolated state dirs."""
    counter = {"n": 0}

    def factory(**config_overrides) -> AppContext:
        counter["n"] += 1
        config = replace(
            AppConfig(),
            provider_mode="replay",
            cassette_path=str(demo_cassette),
            state_dir=str(tmp_path / f"state-{counter['n']}"),
            sandbox_dir=str(tmp_path / f"sandbox-{counter['n']}"),
            **config_overrides,
        )
        return AppContext(config=config, deterministic=True)

    return factory


@pytest.fixture
def fig2():
    return fig2_spec()


def record_replay_gateway(tmp_path: Path, rules, name: str = "case"
                          ) -> LlmGateway:
    """Record a cassette against a canned transport, then open it in
    replay mode.  ``rules`` is a list of (predicate, text) pairs."""
    path = tmp_path / f"{name}.jsonl"
    recorder = LlmGateway(mode=ProviderMode.RECORD,
                          cassette=Cassette(path),
                          transport=CannedTransport(rules))
    return recorder


def replay_gateway_for(path: Path) -> LlmGateway:
    return LlmGateway(mode=ProviderMode.REPLAY, cassette=Cassette(path))

"""The scripted demo session and its replay cassette.

Four turns exercise the whole pipeline offline: a standards question
(retrieval + answer), generation of the featured XR-over-TCP mmWave
scenario, stub-backed execution of the generated script, and
interpretation of an attached FlowMonitor file.  ``build_demo_cassette``
records the model calls against a deterministic canned transport so any
replay-mode run of the same turns is byte-stable.
"""

from __future__ import annotations

import tempfile
from dataclasses import replace
from pathlib import Path

from .config import AppConfig
from .extraction import EXTRACTOR_SYSTEM_PROMPT
from .gateway import CannedTransport
from .orchestrator import ANSWER_SYSTEM_PROMPT, Attachment
from .runtime import AppContext, packaged_fixture_dir
from .util import canonical_json

FIG2_PROMPT = (
    "I want to use XR traffic with the 5G-Lena NR helper, which uses a 3GPP "
    "UMI channel model with a frequency of 28 GHz and a 200 MHz bandwidth "
    "and 1 component carrier with 100 UE's. Also, I want to have a TCP "
    "application and a scanning beamforming method."
)

GENERAL_QUESTION = "What is numerology in 5G NR?"
RUN_MESSAGE = "run it"
INTERPRET_MESSAGE = "interpret this FlowMonitor output"

NUMEROLOGY_ANSWER = (
    "Numerology is the NR subcarrier-spacing index: spacing is 15 kHz "
    "scaled by two to the power of the index, so numerology 0 means 15 kHz, "
    "1 means 30 kHz, 2 means 60 kHz, 3 means 120 kHz and 4 means 240 kHz. "
    "Higher numerologies shorten slots and cut latency, and millimeter-wave "
    "carriers typically run numerology 2 or 3."
)

FIG2_EXTRACTION_JSON = canonical_json({
    "frequency": "28 GHz",
    "bandwidth": "200 MHz",
    "cc_count": 1,
    "ue_count": 100,
    "channel_model": "UMi",
    "traffic_profile": "XR",
    "transport": "TCP",
    "beamforming": "SCANNING",
    "helper_stack": "NR_5GLENA",
})


def demo_attachment() -> Attachment:
    xml = (packaged_fixture_dir() / "cttc-nr-demo"
           / "flow-monitor.xml").read_text("utf-8")
    return Attachment(name="flow-monitor.xml", content=xml)


def scripted_turns() -> list[tuple[str, list[Attachment]]]:
    """The 4-turn script: ask, generate, execute-stub, interpret."""
    return [
        (GENERAL_QUESTION, []),
        (FIG2_PROMPT, []),
        (RUN_MESSAGE, []),
        (INTERPRET_MESSAGE, [demo_attachment()]),
    ]


def demo_transport() -> CannedTransport:
    """Deterministic stand-in for a live model, used when recording."""
    transport = CannedTransport()
    transport.add_rule(
        lambda req: req.structured_output_contract == "scenario-spec-v1",
        FIG2_EXTRACTION_JSON)
    transport.add_rule(
        lambda req: req.messages[0].content == ANSWER_SYSTEM_PROMPT,
        NUMEROLOGY_ANSWER)
    transport.add_rule(
        lambda req: req.messages[0].content == EXTRACTOR_SYSTEM_PROMPT,
        FIG2_EXTRACTION_JSON)
    return transport


def run_scripted_session(context: AppContext):
    """Post the 4 demo turns into a fresh session; returns the transcript."""
    session = context.create_session()
    for text, attachments in scripted_turns():
        context.post_message(session.session_id, text,
                             attachments=attachments)
    return context.get_transcript(session.session_id)


def build_demo_cassette(cassette_path: str | Path,
                        state_dir: str | Path | None = None) -> Path:
    """Record the demo session's model calls into a cassette file."""
    cassette_path = Path(cassette_path)
    cassette_path.parent.mkdir(parents=True, exist_ok=True)
    if cassette_path.exists():
        cassette_path.unlink()
    state = Path(state_dir) if state_dir else Path(
        tempfile.mkdtemp(prefix="genonet-demo-"))
    config = replace(AppConfig(), provider_mode="record",
                     cassette_path=str(cassette_path),
                     state_dir=str(state / "record-state"))
    context = AppContext(config=config, transport=demo_transport(),
                         deterministic=True)
    run_scripted_session(context)
    return cassette_path


__all__ = [
    "FIG2_PROMPT", "GENERAL_QUESTION", "INTERPRET_MESSAGE", "RUN_MESSAGE",
    "build_demo_cassette", "demo_attachment", "demo_transport",
    "run_scripted_session", "scripted_turns",
]

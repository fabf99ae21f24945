"""ns-3 simulation script generation.

A deterministic scaffold guarantees the structural skeleton (includes,
namespace, log component, helpers, node creation, channel attributes,
traffic application, attachment, run/teardown); optional gateway calls
elaborate section bodies without being allowed to regress that skeleton.
Templates live under ``data/templates`` as ``string.Template`` files;
generated sources are delimited by ``@genonet:begin/end`` marker comments.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources
from string import Template

from .errors import RefinementRejected, UnsupportedCombination
from .gateway import LlmGateway, LlmRequest, Message
from .scenario import (Beamforming, HelperStack, ScenarioSpec, TrafficProfile,
                       Transport, spec_hash)

logger = logging.getLogger(__name__)

SECTION_ORDER = ("includes", "namespace", "log-component", "helpers", "nodes",
                 "channel", "internet", "traffic", "attachment", "execution")

# Sections whose bodies the model may elaborate in llm_refine mode.
REFINABLE_SECTIONS = ("channel", "traffic")

REFINER_SYSTEM_PROMPT = (
    "You elaborate one section of an ns-3 simulation script. Keep every "
    "existing identifier, numeric literal, and call; you may add comments "
    "and supporting statements. Reply with code only, no fences, no "
    "section markers."
)

# (helper_stack, traffic_profile, transport) -> traffic template stem.
TEMPLATE_COVERAGE: dict[tuple[HelperStack, TrafficProfile, Transport], str] = {
    (HelperStack.NR_5GLENA, TrafficProfile.XR, Transport.TCP): "bulk_tcp",
    (HelperStack.NR_5GLENA, TrafficProfile.BULK, Transport.TCP): "bulk_tcp",
    (HelperStack.NR_5GLENA, TrafficProfile.CBR, Transport.UDP): "cbr_udp",
    (HelperStack.NR_5GLENA, TrafficProfile.ECHO, Transport.UDP): "echo_udp",
    (HelperStack.WIFI, TrafficProfile.CBR, Transport.UDP): "cbr_udp",
    (HelperStack.P2P_CSMA, TrafficProfile.ECHO, Transport.UDP): "echo_udp",
}

# Fallback combination per stack when the requested one is uncovered.
STACK_DEFAULT_COMBO: dict[HelperStack, tuple[TrafficProfile, Transport]] = {
    HelperStack.NR_5GLENA: (TrafficProfile.CBR, Transport.UDP),
    HelperStack.WIFI: (TrafficProfile.CBR, Transport.UDP),
    HelperStack.P2P_CSMA: (TrafficProfile.ECHO, Transport.UDP),
}

# Canonical transport for each traffic profile (the covered pairing).
PROFILE_TRANSPORT: dict[TrafficProfile, Transport] = {
    TrafficProfile.XR: Transport.TCP,
    TrafficProfile.BULK: Transport.TCP,
    TrafficProfile.CBR: Transport.UDP,
    TrafficProfile.ECHO: Transport.UDP,
}

STACK_TEMPLATE_STEM = {
    HelperStack.NR_5GLENA: "nr_5glena",
    HelperStack.WIFI: "wifi",
    HelperStack.P2P_CSMA: "p2p_csma",
}

CHANNEL_SCENARIO_TOKEN = {
    "UMi": "UMi_StreetCanyon",
    "UMa": "UMa",
    "RMa": "RMa",
    "InH-Office": "InH_OfficeOpen",
}

_DIALECT_EXT = {"cpp": "cpp", "python": "py"}

MARKER_RE = re.compile(
    r"^[ \t]*(?://|#) @genonet:(begin|end) ([a-z-]+)[ \t]*$", re.MULTILINE)


@dataclass(frozen=True)
class Section:
    start: int
    end: int
    provenance: str  # scaffold | llm


@dataclass(frozen=True)
class GeneratedArtifact:
    dialect: str  # cpp | python (the ns-3 binding dialect of the script)
    source: str
    sections: dict[str, Section]
    spec: ScenarioSpec
    spec_digest: str
    created_at: float = 0.0
    rejected_sections: tuple[str, ...] = ()

    def with_source(self, source: str, provenance: str = "llm"
                    ) -> "GeneratedArtifact":
        """Same artifact identity with replaced source (used by repair)."""
        return GeneratedArtifact(
            dialect=self.dialect, source=source,
            sections=scan_sections(source, provenance=provenance),
            spec=self.spec, spec_digest=self.spec_digest,
            created_at=self.created_at,
            rejected_sections=self.rejected_sections)

    def to_dict(self) -> dict:
        return {
            "dialect": self.dialect,
            "source": self.source,
            "sections": {name: {"start": s.start, "end": s.end,
                                "provenance": s.provenance}
                         for name, s in self.sections.items()},
            "spec": self.spec.to_dict(),
            "spec_digest": self.spec_digest,
            "created_at": self.created_at,
            "rejected_sections": list(self.rejected_sections),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratedArtifact":
        return cls(
            dialect=data["dialect"],
            source=data["source"],
            sections={name: Section(s["start"], s["end"], s["provenance"])
                      for name, s in data["sections"].items()},
            spec=ScenarioSpec.from_dict(data["spec"]),
            spec_digest=data["spec_digest"],
            created_at=data.get("created_at", 0.0),
            rejected_sections=tuple(data.get("rejected_sections", ())),
        )


@dataclass(frozen=True)
class StructureCheck:
    check_id: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class StructureReport:
    checks: tuple[StructureCheck, ...]
    ok: bool

    def failed_ids(self) -> list[str]:
        return [c.check_id for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "checks": [{"id": c.check_id, "passed": c.passed,
                            "detail": c.detail} for c in self.checks]}


def engineering_literal(value: float) -> str:
    """Render hertz values the way ns-3 examples write them: 2.8e10 ->
    "28e9", 2e8 -> "200e6"; integers bare, mantissas shortest-form."""
    for exp in (9, 6, 3):
        scaled = value / 10 ** exp
        if scaled >= 1:
            return f"{_shortest(scaled)}e{exp}"
    return _shortest(value)


def _shortest(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def _load_template(relative: str) -> Template:
    text = (resources.files("genonet") / "data" / "templates" / relative
            ).read_text("utf-8")
    return Template(text)


def _beamforming_block(spec: ScenarioSpec, dialect: str) -> str:
    if spec.helper_stack is not HelperStack.NR_5GLENA:
        return ""
    method = {
        Beamforming.SCANNING: "CellScanBeamforming",
        Beamforming.IDEAL: "DirectPathBeamforming",
    }.get(spec.beamforming)
    if method is None:
        return ""
    if dialect == "cpp":
        return (
            "    Ptr<IdealBeamformingHelper> beamformingHelper ="
            " CreateObject<IdealBeamformingHelper>();\n"
            "    beamformingHelper->SetAttribute(\"BeamformingMethod\","
            f" TypeIdValue({method}::GetTypeId()));\n"
            "    nrHelper->SetBeamformingHelper(beamformingHelper);\n")
    return (
        "    beamformingHelper = ns.nr.IdealBeamformingHelper()\n"
        "    beamformingHelper.SetAttribute(\"BeamformingMethod\","
        f" ns.TypeIdValue(ns.nr.{method}.GetTypeId()))\n"
        "    nrHelper.SetBeamformingHelper(beamformingHelper)\n")


def scan_sections(source: str, provenance: str = "scaffold") -> dict[str, Section]:
    """Byte ranges of marker-delimited sections (markers included)."""
    sections: dict[str, Section] = {}
    open_at: dict[str, int] = {}
    for match in MARKER_RE.finditer(source):
        kind, name = match.group(1), match.group(2)
        line_start = source.rfind("\n", 0, match.start()) + 1
        if kind == "begin":
            open_at[name] = line_start
        else:
            start = open_at.pop(name, None)
            if start is None:
                continue
            end = match.end()
            sections[name] = Section(start=start, end=end, provenance=provenance)
    return sections


def scaffold(spec: ScenarioSpec, dialect: str, created_at: float = 0.0
             ) -> GeneratedArtifact:
    """Deterministic template expansion for a validated spec.

    Raises UnsupportedCombination (carrying the nearest supported
    combination) when no traffic template covers (helper_stack,
    traffic_profile, transport).
    """
    if dialect not in _DIALECT_EXT:
        raise ValueError(f"unknown dialect {dialect!r}")
    combo = (spec.helper_stack, spec.traffic_profile, spec.transport)
    traffic_stem = TEMPLATE_COVERAGE.get(combo)
    if traffic_stem is None:
        raise UnsupportedCombination(
            requested=tuple(part.value for part in combo),
            nearest=_nearest_supported(combo))

    ext = _DIALECT_EXT[dialect]
    stack_stem = STACK_TEMPLATE_STEM[spec.helper_stack]
    base = _load_template(f"{stack_stem}.{ext}.tmpl")
    traffic = _load_template(f"traffic/{stack_stem}/{traffic_stem}.{ext}.tmpl")

    values = {
        "gnb_count": str(spec.gnb_count),
        "ue_count": str(spec.ue_count),
        "cc_count": str(spec.cc_count),
        "numerology": str(spec.numerology),
        "frequency_literal": engineering_literal(spec.frequency_hz),
        "bandwidth_literal": engineering_literal(spec.bandwidth_hz),
        "sim_duration": _shortest(spec.sim_duration_s),
        "channel_scenario": CHANNEL_SCENARIO_TOKEN[spec.channel_model.value],
        "beamforming_block": _beamforming_block(spec, dialect),
    }
    values["traffic_block"] = traffic.substitute(values).rstrip("\n")
    source = base.substitute(values)
    return GeneratedArtifact(
        dialect=dialect, source=source, sections=scan_sections(source),
        spec=spec, spec_digest=spec_hash(spec), created_at=created_at)


def _nearest_supported(combo) -> tuple[str, str, str]:
    stack, traffic, _transport = combo
    canonical = PROFILE_TRANSPORT[traffic]
    if (stack, traffic, canonical) in TEMPLATE_COVERAGE:
        return (stack.value, traffic.value, canonical.value)
    fallback_traffic, fallback_transport = STACK_DEFAULT_COMBO[stack]
    return (stack.value, fallback_traffic.value, fallback_transport.value)


# --- structural lint ----------------------------------------------------------

@dataclass(frozen=True)
class _CheckSpec:
    check_id: str
    patterns: tuple[str, ...]
    detail: str


def _check_table(spec: ScenarioSpec, dialect: str) -> list[_CheckSpec]:
    stack = spec.helper_stack
    cpp = dialect == "cpp"

    include_patterns = {
        HelperStack.NR_5GLENA: r"ns3/nr-module\.h",
        HelperStack.WIFI: r"ns3/wifi-module\.h",
        HelperStack.P2P_CSMA: r"ns3/csma-module\.h",
    }
    helper_patterns = {
        HelperStack.NR_5GLENA: (r"CreateObject<NrHelper>" if cpp
                                else r"ns\.nr\.NrHelper\(\)"),
        HelperStack.WIFI: r"WifiHelper",
        HelperStack.P2P_CSMA: r"CsmaHelper|PointToPointHelper",
    }
    node_names = {
        HelperStack.NR_5GLENA: ("gnbNodes", "ueNodes"),
        HelperStack.WIFI: ("apNodes", "staNodes"),
        HelperStack.P2P_CSMA: ("serverNodes", "clientNodes"),
    }
    attachment_patterns = {
        HelperStack.NR_5GLENA: r"AttachToClosestGnb",
        HelperStack.WIFI: r"StaWifiMac",
        HelperStack.P2P_CSMA: r"Ipv4AddressHelper",
    }
    traffic_patterns = {
        "bulk_tcp": r"BulkSendHelper",
        "cbr_udp": r"UdpClientHelper",
        "echo_udp": r"UdpEchoServerHelper",
    }
    combo = (stack, spec.traffic_profile, spec.transport)
    traffic_stem = TEMPLATE_COVERAGE.get(combo, "bulk_tcp")
    gnb_name, ue_name = node_names[stack]

    checks = [
        _CheckSpec("includes",
                   ((r'#include "ns3/', include_patterns[stack]) if cpp
                    else (r"from ns import ns",)),
                   "include/import block for the selected helper stack"),
    ]
    if cpp:
        checks.append(_CheckSpec("namespace", (r"using namespace ns3;",),
                                 "ns-3 namespace usage"))
    checks.extend([
        _CheckSpec("log-component",
                   ((r"NS_LOG_COMPONENT_DEFINE",) if cpp
                    else (r"LogComponentEnable",)),
                   "log component declaration"),
        _CheckSpec("helper", (helper_patterns[stack],),
                   "helper instantiation matching the helper stack"),
        _CheckSpec("node-counts",
                   (rf"{gnb_name}\.Create\({spec.gnb_count}\)",
                    rf"{ue_name}\.Create\({spec.ue_count}\)"),
                   f"node creation for {spec.gnb_count} gNB / {spec.ue_count} UE"),
        _CheckSpec("channel-attributes",
                   (re.escape(engineering_literal(spec.frequency_hz)),
                    re.escape(engineering_literal(spec.bandwidth_hz))),
                   "channel attributes carrying the spec frequency/bandwidth"),
        _CheckSpec("traffic-block", (traffic_patterns[traffic_stem],),
                   "traffic application block for the profile/transport pair"),
        _CheckSpec("attachment", (attachment_patterns[stack],),
                   "attachment step"),
        _CheckSpec("run-teardown",
                   ((r"Simulator::Run\(\)", r"Simulator::Destroy\(\)") if cpp
                    else (r"Simulator\.Run\(\)", r"Simulator\.Destroy\(\)")),
                   "simulator run followed by teardown"),
    ])
    return checks


def lint_structure(artifact: GeneratedArtifact) -> StructureReport:
    """Pure text analysis of the required-section checklist.

    Checks presence and relative order; no compilation.  The run/teardown
    check additionally requires Run to precede Destroy.
    """
    source = artifact.source
    results: list[StructureCheck] = []
    anchor = -1
    for check in _check_table(artifact.spec, artifact.dialect):
        positions = []
        missing = None
        for pattern in check.patterns:
            match = re.search(pattern, source)
            if match is None:
                missing = pattern
                break
            positions.append(match.start())
        if missing is not None:
            results.append(StructureCheck(check.check_id, False,
                                          f"missing: {check.detail}"))
            continue
        if check.check_id == "run-teardown" and positions[0] >= positions[1]:
            results.append(StructureCheck(check.check_id, False,
                                          "teardown precedes run"))
            continue
        first = min(positions)
        if first < anchor:
            results.append(StructureCheck(check.check_id, False,
                                          f"out of order: {check.detail}"))
            continue
        results.append(StructureCheck(check.check_id, True))
        anchor = first
    return StructureReport(checks=tuple(results),
                           ok=all(c.passed for c in results))


# --- generation with optional refinement --------------------------------------

def section_body(artifact: GeneratedArtifact, section_id: str) -> str:
    """Text between a section's begin and end marker lines."""
    section = artifact.sections[section_id]
    text = artifact.source[section.start:section.end]
    lines = text.splitlines(keepends=True)
    return "".join(lines[1:-1])


def _replace_section_body(source: str, section_id: str, body: str) -> str:
    sections = scan_sections(source)
    section = sections[section_id]
    text = source[section.start:section.end]
    lines = text.splitlines(keepends=True)
    if not body.endswith("\n"):
        body += "\n"
    return source[:section.start] + lines[0] + body + lines[-1] + source[section.end:]


def build_refinement_request(spec_digest: str, dialect: str, section_id: str,
                             body: str, model_id: str = "default") -> LlmRequest:
    user = (f"Script dialect: {dialect}\n"
            f"Scenario digest: {spec_digest}\n"
            f"Section: {section_id}\n\n"
            f"Current section body:\n{body}\n\n"
            "Elaborate this section body.")
    return LlmRequest(
        messages=(Message("system", REFINER_SYSTEM_PROMPT),
                  Message("user", user)),
        model_id=model_id, temperature=0.0)


def generate_script(spec: ScenarioSpec, dialect: str,
                    mode: str = "scaffold_only",
                    gateway: LlmGateway | None = None,
                    created_at: float = 0.0,
                    model_id: str = "default") -> GeneratedArtifact:
    """Produce a simulation script for a validated spec.

    scaffold_only returns the deterministic scaffold unchanged.
    llm_refine issues one gateway call per refinable section; a refined
    body is kept only if the full artifact still passes lint_structure,
    otherwise the scaffold body stays and the section is recorded in
    ``rejected_sections``.  Section markers are never altered.
    """
    artifact = scaffold(spec, dialect, created_at=created_at)
    if mode == "scaffold_only":
        return artifact
    if mode != "llm_refine":
        raise ValueError(f"unknown generation mode {mode!r}")
    if gateway is None:
        raise ValueError("llm_refine mode requires a gateway")

    source = artifact.source
    provenance: dict[str, str] = {name: "scaffold" for name in artifact.sections}
    rejected: list[str] = []
    for section_id in REFINABLE_SECTIONS:
        if section_id not in artifact.sections:
            continue
        current = artifact.with_source(source, provenance="scaffold")
        body = section_body(current, section_id)
        request = build_refinement_request(artifact.spec_digest, dialect,
                                           section_id, body, model_id)
        response = gateway.complete(request)
        candidate_source = _replace_section_body(source, section_id,
                                                 response.text)
        candidate = artifact.with_source(candidate_source)
        report = lint_structure(candidate)
        if report.ok and set(candidate.sections) == set(artifact.sections):
            source = candidate_source
            provenance[section_id] = "llm"
        else:
            rejected.append(section_id)
            logger.info("refinement rejected for section %s: %s",
                        section_id, RefinementRejected(section_id))

    sections = {name: Section(s.start, s.end, provenance.get(name, "scaffold"))
                for name, s in scan_sections(source).items()}
    return GeneratedArtifact(dialect=dialect, source=source, sections=sections,
                             spec=spec, spec_digest=artifact.spec_digest,
                             created_at=created_at,
                             rejected_sections=tuple(rejected))


__all__ = [
    "GeneratedArtifact", "MARKER_RE", "PROFILE_TRANSPORT", "REFINABLE_SECTIONS",
    "SECTION_ORDER", "Section", "StructureCheck", "StructureReport",
    "TEMPLATE_COVERAGE", "build_refinement_request", "engineering_literal",
    "generate_script", "lint_structure", "scaffold", "scan_sections",
    "section_body",
]

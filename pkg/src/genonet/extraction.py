"""Free-text prompt -> scenario fields.

Extraction is LLM-first through the gateway (schema-constrained), with a
pure rule-based pass as deterministic fallback and cross-check.  Fields
the two paths disagree on numerically are flagged but the model's value
wins; the flag is surfaced in the session transcript.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources

from . import schemas
from .errors import CassetteMiss, ContractViolation, ExtractionEmpty, SpecInvalid
from .gateway import LlmGateway, LlmRequest, Message, parse_structured
from .scenario import (RawSpecDraft, ScenarioSpec, UNIT_FACTORS_HZ,
                       normalize_units, parse_magnitude, validate)

logger = logging.getLogger(__name__)

SPEC_FIELDS = (
    "frequency", "bandwidth", "sim_duration", "cc_count", "ue_count",
    "gnb_count", "numerology", "channel_model", "traffic_profile",
    "transport", "beamforming", "helper_stack",
)

NUMERIC_FIELDS = ("frequency", "bandwidth", "sim_duration", "cc_count",
                  "ue_count", "gnb_count", "numerology")

EXTRACTOR_SYSTEM_PROMPT = (
    "You extract network-simulation scenario parameters from user requests. "
    "Reply with a single JSON object using only these keys: "
    + ", ".join(SPEC_FIELDS) + ". "
    "Include a key only when the request states its value. Frequencies and "
    "bandwidths are strings with units (e.g. \"28 GHz\"); counts are integers."
)


@dataclass
class PartialSpec:
    """Every scenario field made optional, with per-field provenance."""

    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)  # field -> llm | rule | default
    flags: list = field(default_factory=list)  # fields where llm and rule disagreed

    def set(self, name: str, value, source: str) -> None:
        self.values[name] = value
        self.provenance[name] = source

    def get(self, name: str):
        return self.values.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ExtractionResult:
    """Validated spec plus the provenance trail kept for the transcript."""

    spec: ScenarioSpec
    provenance: dict
    flags: tuple = ()


def _load_keyword_table() -> list[tuple[str, str, str]]:
    """(surface, field, value) rows from the packaged keyword table,
    longest surface first so multi-word forms win over substrings."""
    rows: list[tuple[str, str, str]] = []
    text = (resources.files("genonet") / "data" / "keywords.tsv").read_text("utf-8")
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        surface, target = line.split("\t")
        field_name, value = target.split("=", 1)
        rows.append((surface, field_name, value))
    rows.sort(key=lambda row: len(row[0]), reverse=True)
    return rows


_KEYWORD_TABLE = _load_keyword_table()

_HZ_QUANTITY_RE = re.compile(r"(\d+(?:\.\d+)?)\s*(GHz|MHz|kHz|Hz)\b", re.IGNORECASE)
_DURATION_RE = re.compile(
    r"(?:for|duration(?: of)?|simulate)\s+(\d+(?:\.\d+)?)\s*(seconds|second|secs|sec|s|ms)\b",
    re.IGNORECASE)
_UE_RE = re.compile(r"(\d+)\s*(?:ue'?s?|user equipments?|users?)\b", re.IGNORECASE)
_GNB_RE = re.compile(r"(\d+)\s*(?:gnb'?s?|base stations?|cells?)\b", re.IGNORECASE)
_CC_RE = re.compile(r"(\d+)\s*(?:component carriers?|carriers?|cc'?s?)\b", re.IGNORECASE)
_NUMEROLOGY_RE = re.compile(
    r"numerology(?:\s+(?:index|of|mu))?\s*=?\s*(\d)", re.IGNORECASE)

# A Hz quantity counts as bandwidth only when the word is adjacent:
# directly after the magnitude ("200 MHz bandwidth") or introducing it
# ("bandwidth of 200 MHz").  Loose windows misfile phrases like
# "3.5 GHz and a bandwidth of 100 MHz".
_BEFORE_WINDOW = 24
_BANDWIDTH_BEFORE_RE = re.compile(r"bandwidth\s*(?:of|is|at|=|:)?\s*$")
_BANDWIDTH_AFTER_RE = re.compile(r"\s*(?:of\s+)?bandwidth\b")


def rule_fallback_extract(prompt: str) -> PartialSpec:
    """Pure pattern pass over the prompt; deterministic across platforms.

    Quantities with Hz-family suffixes become frequency or bandwidth (the
    word "bandwidth" near the magnitude selects bandwidth); cardinals next
    to UE/gNB/carrier words become counts; the keyword table maps surface
    forms to enumerations.  An empty result is valid.
    """
    partial = PartialSpec()
    lowered = prompt.lower()

    for match in _HZ_QUANTITY_RE.finditer(prompt):
        start, end = match.span()
        before = lowered[max(0, start - _BEFORE_WINDOW):start]
        after = lowered[end:]
        raw = f"{match.group(1)} {match.group(2)}"
        is_bandwidth = bool(_BANDWIDTH_BEFORE_RE.search(before)
                            or _BANDWIDTH_AFTER_RE.match(after))
        preference = (("bandwidth", "frequency") if is_bandwidth
                      else ("frequency", "bandwidth"))
        for name in preference:
            if name not in partial:
                partial.set(name, raw, "rule")
                break

    duration = _DURATION_RE.search(prompt)
    if duration:
        partial.set("sim_duration", f"{duration.group(1)} {duration.group(2)}", "rule")

    for regex, name in ((_UE_RE, "ue_count"), (_GNB_RE, "gnb_count"),
                        (_CC_RE, "cc_count")):
        match = regex.search(prompt)
        if match:
            partial.set(name, int(match.group(1)), "rule")
    numerology = _NUMEROLOGY_RE.search(prompt)
    if numerology:
        partial.set("numerology", int(numerology.group(1)), "rule")

    for surface, field_name, value in _KEYWORD_TABLE:
        if field_name in partial:
            continue
        if re.search(rf"(?<![a-z0-9]){re.escape(surface)}(?![a-z0-9])", lowered):
            partial.set(field_name, value, "rule")

    return partial


def build_extraction_request(prompt: str, context: tuple[str, ...] = (),
                             model_id: str = "default") -> LlmRequest:
    """The schema-constrained gateway request for one extraction call."""
    parts = []
    if context:
        parts.append("Reference material:\n" + "\n---\n".join(context))
    parts.append(f"Request:\n{prompt}")
    parts.append("Return the scenario parameters as JSON.")
    return LlmRequest(
        messages=(Message("system", EXTRACTOR_SYSTEM_PROMPT),
                  Message("user", "\n\n".join(parts))),
        model_id=model_id,
        temperature=0.0,
        structured_output_contract=schemas.SCENARIO_SPEC_V1,
    )


def _numeric_value(name: str, value):
    if name in ("frequency", "bandwidth"):
        return parse_magnitude(value, UNIT_FACTORS_HZ, name)
    if name == "sim_duration":
        return parse_magnitude(value, {"s": 1.0, "ms": 1e-3, "sec": 1.0,
                                       "secs": 1.0, "second": 1.0,
                                       "seconds": 1.0}, name)
    return float(value)


def extract_intent(prompt: str, context: tuple[str, ...] = (),
                   gateway: LlmGateway | None = None,
                   model_id: str = "default") -> PartialSpec:
    """One schema-constrained gateway call, cross-checked by the rule pass.

    Unparseable model output falls back to the rule extraction
    transparently; a missing cassette entry in replay mode does not (that
    is a fixture gap and propagates).  Raises ExtractionEmpty when neither
    path yields any field.
    """
    rule_partial = rule_fallback_extract(prompt)

    llm_fields: dict = {}
    if gateway is not None:
        request = build_extraction_request(prompt, context, model_id)
        try:
            response = gateway.complete(request)
            llm_fields = parse_structured(response.text, schemas.SCENARIO_SPEC_V1)
        except (ContractViolation, ValueError) as exc:
            logger.info("extraction output unusable (%s); using rule pass", exc)
            llm_fields = {}
        except CassetteMiss:
            raise

    partial = PartialSpec()
    for name, value in llm_fields.items():
        partial.set(name, value, "llm")
    for name in rule_partial.values:
        if name in partial:
            if name in NUMERIC_FIELDS:
                try:
                    llm_num = _numeric_value(name, partial.get(name))
                    rule_num = _numeric_value(name, rule_partial.get(name))
                except Exception:  # noqa: BLE001 - unparses count as disagreement
                    partial.flags.append(name)
                    continue
                if llm_num != rule_num:
                    partial.flags.append(name)
        else:
            partial.set(name, rule_partial.get(name), "rule")

    if not partial.values:
        raise ExtractionEmpty(f"no scenario content recognized in prompt: {prompt!r}")
    return partial


def merge_and_default(partial: PartialSpec) -> ExtractionResult:
    """Fill unset fields from the defaults table, normalize, and validate.

    Field-wise precedence is llm > rule > default (already folded into the
    PartialSpec by extract_intent); per-field provenance is preserved for
    the transcript.  Raises SpecInvalid carrying the validation report.
    """
    draft = RawSpecDraft(
        frequency=partial.get("frequency"),
        bandwidth=partial.get("bandwidth"),
        sim_duration=partial.get("sim_duration"),
        cc_count=partial.get("cc_count"),
        ue_count=partial.get("ue_count"),
        gnb_count=partial.get("gnb_count"),
        numerology=partial.get("numerology"),
        channel_model=partial.get("channel_model"),
        traffic_profile=partial.get("traffic_profile"),
        transport=partial.get("transport"),
        beamforming=partial.get("beamforming"),
        helper_stack=partial.get("helper_stack"),
    )
    spec = normalize_units(draft)
    report = validate(spec)
    if not report.ok:
        raise SpecInvalid(report)
    provenance = {name: partial.provenance.get(name, "default")
                  for name in SPEC_FIELDS}
    return ExtractionResult(spec=spec, provenance=provenance,
                            flags=tuple(partial.flags))


__all__ = [
    "EXTRACTOR_SYSTEM_PROMPT", "ExtractionResult", "PartialSpec",
    "SPEC_FIELDS", "build_extraction_request", "extract_intent",
    "merge_and_default", "rule_fallback_extract",
]

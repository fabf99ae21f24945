"""Canonical scenario description: unit normalization, validation, hashing.

A scenario travels through the pipeline as a ``ScenarioSpec``: every
frequency in hertz, every time in seconds, enumerations canonicalized.
Specs are immutable values and safe to share between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import NegativeMagnitude, UnknownUnit
from .util import canonical_json, sha256_hex

FR2_BOUNDARY_HZ = 24.25e9
MIN_FREQUENCY_HZ = 0.5e9
MAX_FREQUENCY_HZ = 100e9
MAX_BANDWIDTH_HZ = 2e9

# Relative tolerance for frequency comparisons (avoids unit drift).
FREQ_RTOL = 1e-6


class ChannelModel(str, Enum):
    UMI = "UMi"
    UMA = "UMa"
    RMA = "RMa"
    INH_OFFICE = "InH-Office"


class TrafficProfile(str, Enum):
    XR = "XR"
    CBR = "CBR"
    BULK = "BULK"
    ECHO = "ECHO"


class Transport(str, Enum):
    TCP = "TCP"
    UDP = "UDP"


class Beamforming(str, Enum):
    SCANNING = "SCANNING"
    IDEAL = "IDEAL"
    NONE = "NONE"


class HelperStack(str, Enum):
    NR_5GLENA = "NR_5GLENA"
    WIFI = "WIFI"
    P2P_CSMA = "P2P_CSMA"


# Aliases accepted when canonicalizing enumeration inputs.
CHANNEL_ALIASES = {
    "umi": ChannelModel.UMI,
    "umi-streetcanyon": ChannelModel.UMI,
    "umi_streetcanyon": ChannelModel.UMI,
    "uma": ChannelModel.UMA,
    "rma": ChannelModel.RMA,
    "inh": ChannelModel.INH_OFFICE,
    "inh-office": ChannelModel.INH_OFFICE,
    "inh_office": ChannelModel.INH_OFFICE,
    "indoor office": ChannelModel.INH_OFFICE,
}

UNIT_FACTORS_HZ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
UNIT_FACTORS_S = {"s": 1.0, "ms": 1e-3}

_MAGNITUDE_RE = re.compile(
    r"^\s*([+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*([a-zA-Z]*)\s*$")


@dataclass(frozen=True)
class ScenarioSpec:
    """Unit-normalized structured description of one simulation scenario."""

    frequency_hz: float
    bandwidth_hz: float
    cc_count: int
    numerology: int
    gnb_count: int
    ue_count: int
    channel_model: ChannelModel
    traffic_profile: TrafficProfile
    transport: Transport
    beamforming: Beamforming
    sim_duration_s: float
    helper_stack: HelperStack

    def is_fr2(self) -> bool:
        return self.frequency_hz >= FR2_BOUNDARY_HZ

    def to_dict(self) -> dict:
        """Canonical key-sorted serializable form (fixed field names)."""
        return {
            "frequency_hz": float(self.frequency_hz),
            "bandwidth_hz": float(self.bandwidth_hz),
            "cc_count": int(self.cc_count),
            "numerology": int(self.numerology),
            "gnb_count": int(self.gnb_count),
            "ue_count": int(self.ue_count),
            "channel_model": self.channel_model.value,
            "traffic_profile": self.traffic_profile.value,
            "transport": self.transport.value,
            "beamforming": self.beamforming.value,
            "sim_duration_s": float(self.sim_duration_s),
            "helper_stack": self.helper_stack.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        return cls(
            frequency_hz=float(data["frequency_hz"]),
            bandwidth_hz=float(data["bandwidth_hz"]),
            cc_count=int(data["cc_count"]),
            numerology=int(data["numerology"]),
            gnb_count=int(data["gnb_count"]),
            ue_count=int(data["ue_count"]),
            channel_model=ChannelModel(data["channel_model"]),
            traffic_profile=TrafficProfile(data["traffic_profile"]),
            transport=Transport(data["transport"]),
            beamforming=Beamforming(data["beamforming"]),
            sim_duration_s=float(data["sim_duration_s"]),
            helper_stack=HelperStack(data["helper_stack"]),
        )


@dataclass(frozen=True)
class RawSpecDraft:
    """Pre-normalization draft: magnitudes may carry unit suffixes.

    ``frequency``/``bandwidth``/``sim_duration`` accept strings like
    ``"28 GHz"`` or bare numbers (interpreted as Hz / seconds).
    Every field is optional; ``normalize_units`` fills defaults.
    """

    frequency: str | float | None = None
    bandwidth: str | float | None = None
    sim_duration: str | float | None = None
    cc_count: int | None = None
    ue_count: int | None = None
    gnb_count: int | None = None
    numerology: int | None = None
    channel_model: str | ChannelModel | None = None
    traffic_profile: str | TrafficProfile | None = None
    transport: str | Transport | None = None
    beamforming: str | Beamforming | None = None
    helper_stack: str | HelperStack | None = None


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...] = ()

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"field": v.field, "rule": v.rule, "message": v.message}
                for v in self.violations
            ],
        }


# Defaults applied by normalize_units for unspecified fields.  The prompt
# corpus names UEs far more often than gNBs, so gnb_count falls back to 1;
# numerology tracks the frequency range (2 for FR2+, 1 below).
DEFAULTS = {
    "frequency_hz": 3.5e9,
    "bandwidth_hz": 100e6,
    "cc_count": 1,
    "ue_count": 1,
    "gnb_count": 1,
    "channel_model": ChannelModel.UMI,
    "traffic_profile": TrafficProfile.CBR,
    "transport": Transport.UDP,
    "beamforming": Beamforming.NONE,
    "sim_duration_s": 10.0,
    "helper_stack": HelperStack.NR_5GLENA,
}


def parse_magnitude(value: str | float, factors: dict[str, float],
                    field_name: str) -> float:
    """Parse ``"28 GHz"``-style magnitudes into base units.

    Bare numbers are taken as already being in the base unit.
    Raises UnknownUnit for unrecognized suffixes, NegativeMagnitude for
    values below zero.
    """
    if isinstance(value, (int, float)):
        magnitude = float(value)
        if magnitude < 0:
            raise NegativeMagnitude(field_name, magnitude)
        return magnitude
    match = _MAGNITUDE_RE.match(value)
    if not match:
        raise UnknownUnit(value.strip(), field_name)
    number, suffix = match.group(1), match.group(2)
    if suffix:
        factor = factors.get(suffix.lower())
        if factor is None:
            raise UnknownUnit(suffix, field_name)
    else:
        factor = 1.0
    magnitude = float(number) * factor
    if magnitude < 0:
        raise NegativeMagnitude(field_name, magnitude)
    return magnitude


def _canon_enum(value, enum_cls, aliases: dict | None = None):
    if value is None or isinstance(value, enum_cls):
        return value
    text = str(value).strip()
    if aliases:
        hit = aliases.get(text.lower())
        if hit is not None:
            return hit
    for member in enum_cls:
        if member.value.lower() == text.lower() or member.name.lower() == text.lower():
            return member
    raise UnknownUnit(text, enum_cls.__name__)


def normalize_units(raw: RawSpecDraft) -> ScenarioSpec:
    """Convert a draft to hertz/seconds and fill defaults; not yet validated."""
    frequency_hz = (DEFAULTS["frequency_hz"] if raw.frequency is None
                    else parse_magnitude(raw.frequency, UNIT_FACTORS_HZ, "frequency"))
    bandwidth_hz = (DEFAULTS["bandwidth_hz"] if raw.bandwidth is None
                    else parse_magnitude(raw.bandwidth, UNIT_FACTORS_HZ, "bandwidth"))
    sim_duration_s = (DEFAULTS["sim_duration_s"] if raw.sim_duration is None
                      else parse_magnitude(raw.sim_duration, UNIT_FACTORS_S,
                                           "sim_duration"))
    numerology = raw.numerology
    if numerology is None:
        numerology = 2 if frequency_hz >= FR2_BOUNDARY_HZ else 1
    return ScenarioSpec(
        frequency_hz=frequency_hz,
        bandwidth_hz=bandwidth_hz,
        cc_count=int(raw.cc_count) if raw.cc_count is not None else DEFAULTS["cc_count"],
        numerology=int(numerology),
        gnb_count=int(raw.gnb_count) if raw.gnb_count is not None else DEFAULTS["gnb_count"],
        ue_count=int(raw.ue_count) if raw.ue_count is not None else DEFAULTS["ue_count"],
        channel_model=_canon_enum(raw.channel_model, ChannelModel, CHANNEL_ALIASES)
        or DEFAULTS["channel_model"],
        traffic_profile=_canon_enum(raw.traffic_profile, TrafficProfile)
        or DEFAULTS["traffic_profile"],
        transport=_canon_enum(raw.transport, Transport) or DEFAULTS["transport"],
        beamforming=_canon_enum(raw.beamforming, Beamforming)
        or DEFAULTS["beamforming"],
        sim_duration_s=sim_duration_s,
        helper_stack=_canon_enum(raw.helper_stack, HelperStack)
        or DEFAULTS["helper_stack"],
    )


def validate(spec: ScenarioSpec) -> ValidationReport:
    """Check every invariant; pure and total, reports all violations."""
    violations: list[Violation] = []

    def bad(field_name: str, rule: str, message: str) -> None:
        violations.append(Violation(field_name, rule, message))

    if not MIN_FREQUENCY_HZ <= spec.frequency_hz <= MAX_FREQUENCY_HZ:
        bad("frequency_hz", "range-0.5-100ghz",
            f"carrier frequency {spec.frequency_hz} Hz outside [0.5, 100] GHz")
    if not 0 < spec.bandwidth_hz <= MAX_BANDWIDTH_HZ:
        bad("bandwidth_hz", "range-0-2ghz",
            f"bandwidth {spec.bandwidth_hz} Hz outside (0, 2] GHz")
    if spec.cc_count < 1:
        bad("cc_count", "min-1", f"component carriers must be >= 1, got {spec.cc_count}")
    if spec.gnb_count < 1:
        bad("gnb_count", "min-1", f"gNB count must be >= 1, got {spec.gnb_count}")
    if spec.ue_count < 1:
        bad("ue_count", "min-1", f"UE count must be >= 1, got {spec.ue_count}")
    if spec.sim_duration_s <= 0:
        bad("sim_duration_s", "positive",
            f"simulated time must be > 0 s, got {spec.sim_duration_s}")
    if spec.numerology not in (0, 1, 2, 3, 4):
        bad("numerology", "enum-0-4", f"numerology must be in 0..4, got {spec.numerology}")
    return ValidationReport(ok=not violations, violations=tuple(violations))


def spec_hash(spec: ScenarioSpec) -> str:
    """Stable 256-bit digest over the canonical field-ordered serialization."""
    return sha256_hex(canonical_json(spec.to_dict()))


def fig2_spec() -> ScenarioSpec:
    """The featured mmWave XR-over-TCP demo scenario (28 GHz, 200 MHz, 100 UEs)."""
    return normalize_units(RawSpecDraft(
        frequency="28 GHz",
        bandwidth="200 MHz",
        cc_count=1,
        ue_count=100,
        channel_model="UMi",
        traffic_profile="XR",
        transport="TCP",
        beamforming="SCANNING",
        helper_stack="NR_5GLENA",
    ))


__all__ = [
    "Beamforming", "ChannelModel", "DEFAULTS", "HelperStack", "RawSpecDraft",
    "ScenarioSpec", "TrafficProfile", "Transport", "ValidationReport",
    "Violation", "fig2_spec", "normalize_units", "parse_magnitude",
    "spec_hash", "validate",
]

"""Structured-output contracts registered with the gateway."""

from __future__ import annotations

from .gateway import register_schema

SCENARIO_SPEC_V1 = "scenario-spec-v1"
ROUTE_DECISION_V1 = "route-decision-v1"

_scenario_schema = {
    "type": "object",
    "properties": {
        "frequency": {"type": "string"},
        "bandwidth": {"type": "string"},
        "sim_duration": {"type": "string"},
        "cc_count": {"type": "integer", "minimum": 1},
        "ue_count": {"type": "integer", "minimum": 1},
        "gnb_count": {"type": "integer", "minimum": 1},
        "numerology": {"type": "integer", "minimum": 0, "maximum": 4},
        "channel_model": {"enum": ["UMi", "UMa", "RMa", "InH-Office"]},
        "traffic_profile": {"enum": ["XR", "CBR", "BULK", "ECHO"]},
        "transport": {"enum": ["TCP", "UDP"]},
        "beamforming": {"enum": ["SCANNING", "IDEAL", "NONE"]},
        "helper_stack": {"enum": ["NR_5GLENA", "WIFI", "P2P_CSMA"]},
    },
    "additionalProperties": False,
}

_route_schema = {
    "type": "object",
    "properties": {
        "route": {"enum": ["GeneralQuery", "GenerateCpp", "GeneratePython",
                           "Execute", "Interpret", "Debug"]},
        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
        "rationale": {"type": "string"},
    },
    "required": ["route", "confidence"],
    "additionalProperties": False,
}

register_schema(SCENARIO_SPEC_V1, _scenario_schema)
register_schema(ROUTE_DECISION_V1, _route_schema)

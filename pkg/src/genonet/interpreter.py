"""Simulator output interpretation.

Parses FlowMonitor XML into per-flow records, derives throughput / mean
delay / mean jitter / loss ratio with the simulator's own conventions
(throughput over the first-Tx-to-last-Rx window, jitter denominator
rxPackets-1), and extracts echo-application event timelines from log
text.  Summaries are deterministic templates; an optional gateway pass
may polish wording but must preserve every numeric value verbatim.
"""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from decimal import Decimal

from .errors import MalformedXml, MissingClassifier, UnitParseError
from .gateway import LlmGateway, LlmRequest, Message
from .util import extract_numbers

logger = logging.getLogger(__name__)

PROTO_NAMES = {6: "TCP", 17: "UDP"}

SUMMARIZER_SYSTEM_PROMPT = (
    "You rewrite network measurement summaries to be easier to read. "
    "Never change, round, drop, or add any numeric value."
)


@dataclass(frozen=True)
class FlowRecord:
    flow_id: int
    src_addr: str
    src_port: int
    dst_addr: str
    dst_port: int
    protocol: int
    time_first_tx_s: float
    time_last_rx_s: float
    tx_bytes: int
    rx_bytes: int
    tx_packets: int
    rx_packets: int
    lost_packets: int
    delay_sum_s: float
    jitter_sum_s: float


@dataclass(frozen=True)
class FlowMetrics:
    flow_id: int
    throughput_bps: float
    mean_delay_s: float | None  # None marks an undefined measurement
    mean_jitter_s: float | None
    loss_ratio: float

    def to_dict(self) -> dict:
        return {
            "flow_id": self.flow_id,
            "throughput_bps": self.throughput_bps,
            "mean_delay_s": self.mean_delay_s,
            "mean_jitter_s": self.mean_jitter_s,
            "loss_ratio": self.loss_ratio,
        }


@dataclass(frozen=True)
class TimelineEvent:
    time_s: float
    actor: str  # client | server
    action: str  # sent | received
    num_bytes: int
    peer_addr: str
    peer_port: int

    def to_dict(self) -> dict:
        return {
            "time_s": self.time_s,
            "actor": self.actor,
            "action": self.action,
            "num_bytes": self.num_bytes,
            "peer_addr": self.peer_addr,
            "peer_port": self.peer_port,
        }


@dataclass(frozen=True)
class ParsedEventLog:
    events: tuple[TimelineEvent, ...]
    skipped_lines: int


_TIME_ATTR_RE = re.compile(r"^\+?(-?[0-9.]+(?:e[+-]?[0-9]+)?)(ns|us|ms|s)$",
                           re.IGNORECASE)
_TIME_FACTORS = {"ns": 1e-9, "us": 1e-6, "ms": 1e-3, "s": 1.0}


def _time_attr(element, name: str) -> float:
    """FlowMonitor time attributes land as "+1.2e9ns" or "+1.2s"; both
    normalize to seconds."""
    raw = element.get(name)
    if raw is None:
        raise UnitParseError(name, "<missing>")
    match = _TIME_ATTR_RE.match(raw.strip())
    if not match:
        raise UnitParseError(name, raw)
    return float(match.group(1)) * _TIME_FACTORS[match.group(2).lower()]


def parse_flowmonitor(xml_text: str) -> list[FlowRecord]:
    """One FlowRecord per flow element, joined with its classifier 5-tuple."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc.position)) from exc

    classifiers: dict[int, dict] = {}
    for clf in root.iter("Ipv4FlowClassifier"):
        for flow in clf.findall("Flow"):
            classifiers[int(flow.get("flowId"))] = {
                "src_addr": flow.get("sourceAddress"),
                "dst_addr": flow.get("destinationAddress"),
                "src_port": int(flow.get("sourcePort", 0)),
                "dst_port": int(flow.get("destinationPort", 0)),
                "protocol": int(flow.get("protocol", 0)),
            }

    records: list[FlowRecord] = []
    stats = root.find("FlowStats")
    if stats is None:
        return records
    for flow in stats.findall("Flow"):
        flow_id = int(flow.get("flowId"))
        ctuple = classifiers.get(flow_id)
        if ctuple is None:
            raise MissingClassifier(flow_id)
        records.append(FlowRecord(
            flow_id=flow_id,
            time_first_tx_s=_time_attr(flow, "timeFirstTxPacket"),
            time_last_rx_s=_time_attr(flow, "timeLastRxPacket"),
            delay_sum_s=_time_attr(flow, "delaySum"),
            jitter_sum_s=_time_attr(flow, "jitterSum"),
            tx_bytes=int(flow.get("txBytes")),
            rx_bytes=int(flow.get("rxBytes")),
            tx_packets=int(flow.get("txPackets")),
            rx_packets=int(flow.get("rxPackets")),
            lost_packets=int(flow.get("lostPackets")),
            **ctuple,
        ))
    return records


def compute_metrics(record: FlowRecord) -> FlowMetrics:
    """Derive per-flow metrics; degenerate flows map to defined values.

    throughput = rxBytes*8 / (lastRx - firstTx) when the window is
    positive, else 0; mean delay needs at least one received packet and
    mean jitter at least two, otherwise they are undefined (None); loss
    ratio is lostPackets/txPackets (0 for an empty flow).
    """
    duration = record.time_last_rx_s - record.time_first_tx_s
    throughput = record.rx_bytes * 8.0 / duration if duration > 0 else 0.0
    mean_delay = (record.delay_sum_s / record.rx_packets
                  if record.rx_packets > 0 else None)
    mean_jitter = (record.jitter_sum_s / (record.rx_packets - 1)
                   if record.rx_packets >= 2 else None)
    loss_ratio = (record.lost_packets / record.tx_packets
                  if record.tx_packets > 0 else 0.0)
    return FlowMetrics(flow_id=record.flow_id, throughput_bps=throughput,
                       mean_delay_s=mean_delay, mean_jitter_s=mean_jitter,
                       loss_ratio=loss_ratio)


# Echo-application log grammar, e.g.
#   At time +2s client sent 1024 bytes to 10.1.2.4 port 9
_EVENT_RE = re.compile(
    r"^At time \+?(?P<t>[0-9]+(?:\.[0-9]+)?(?:e[+-]?[0-9]+)?)s "
    r"(?P<actor>client|server) (?P<action>sent|received) "
    r"(?P<n>[0-9]+) bytes (?:to|from) (?P<addr>[0-9a-fA-F.:]+) "
    r"port (?P<port>[0-9]+)\s*$")


def parse_event_log(text: str) -> ParsedEventLog:
    """Line-oriented extraction; non-matching lines are skipped and counted.

    Never fails: events plus skipped lines account for every input line.
    """
    events: list[TimelineEvent] = []
    skipped = 0
    for line in text.splitlines():
        match = _EVENT_RE.match(line.strip())
        if match is None:
            skipped += 1
            continue
        events.append(TimelineEvent(
            time_s=float(match.group("t")),
            actor=match.group("actor"),
            action=match.group("action"),
            num_bytes=int(match.group("n")),
            peer_addr=match.group("addr"),
            peer_port=int(match.group("port")),
        ))
    return ParsedEventLog(events=tuple(events), skipped_lines=skipped)


def _num(value: float) -> str:
    """Shortest exact decimal rendering of a float."""
    if value == int(value):
        return str(int(value))
    return repr(value)


def _decimal(value: float) -> Decimal:
    return Decimal(repr(value))


def round_trip_time(events: tuple[TimelineEvent, ...]) -> Decimal | None:
    """Last client-received time minus first client-sent time, exact
    decimal arithmetic on the parsed timestamps."""
    sent = [e for e in events if e.actor == "client" and e.action == "sent"]
    received = [e for e in events if e.actor == "client" and e.action == "received"]
    if not sent or not received:
        return None
    return _decimal(received[-1].time_s) - _decimal(sent[0].time_s)


def summarize_metrics(metrics: list[FlowMetrics]) -> str:
    """Deterministic per-flow table plus aggregate statements."""
    if not metrics:
        raise ValueError("no flow metrics to summarize")
    lines = [f"Flow performance summary ({len(metrics)} "
             f"flow{'s' if len(metrics) != 1 else ''})", ""]
    header = (f"{'flow':>4}  {'throughput (bit/s)':>20}  {'mean delay (s)':>16}  "
              f"{'mean jitter (s)':>16}  {'loss ratio':>10}")
    lines.append(header)
    lines.append("-" * len(header))
    for m in metrics:
        delay = _num(m.mean_delay_s) if m.mean_delay_s is not None else "n/a"
        jitter = _num(m.mean_jitter_s) if m.mean_jitter_s is not None else "n/a"
        lines.append(f"{_num(m.flow_id):>4}  {_num(m.throughput_bps):>20}  "
                     f"{delay:>16}  {jitter:>16}  {_num(m.loss_ratio):>10}")
    return "\n".join(lines)


def summarize_timeline(parsed: ParsedEventLog) -> str:
    """Deterministic event narration plus derived round-trip statement."""
    events = parsed.events
    if not events:
        raise ValueError("no timeline events to summarize")
    lines = [f"Application event timeline ({len(events)} "
             f"event{'s' if len(events) != 1 else ''}, "
             f"{parsed.skipped_lines} unparsed "
             f"line{'s' if parsed.skipped_lines != 1 else ''})", ""]
    for e in events:
        preposition = "to" if e.action == "sent" else "from"
        lines.append(f"  t={_num(e.time_s)} s  {e.actor} {e.action} "
                     f"{e.num_bytes} bytes {preposition} {e.peer_addr} "
                     f"port {e.peer_port}")
    rtt = round_trip_time(events)
    if rtt is not None:
        lines.append("")
        lines.append(f"Round-trip time: {rtt} s "
                     f"(first client send to last client receive)")
    return "\n".join(lines)


def numeric_inventory(metrics: list[FlowMetrics] | None = None,
                      parsed: ParsedEventLog | None = None) -> set[Decimal]:
    """Every number a template summary is allowed to contain: source field
    values plus the derived quantities (counts, round-trip time)."""
    inventory: set[Decimal] = set()
    if metrics is not None:
        inventory.add(Decimal(len(metrics)))
        for m in metrics:
            inventory.add(Decimal(m.flow_id))
            inventory.add(_decimal(m.throughput_bps))
            inventory.add(_decimal(m.loss_ratio))
            if m.mean_delay_s is not None:
                inventory.add(_decimal(m.mean_delay_s))
            if m.mean_jitter_s is not None:
                inventory.add(_decimal(m.mean_jitter_s))
    if parsed is not None:
        inventory.add(Decimal(len(parsed.events)))
        inventory.add(Decimal(parsed.skipped_lines))
        for e in parsed.events:
            inventory.add(_decimal(e.time_s))
            inventory.add(Decimal(e.num_bytes))
            inventory.add(Decimal(e.peer_port))
        rtt = round_trip_time(parsed.events)
        if rtt is not None:
            inventory.add(rtt)
    return inventory


def numbers_preserved(template_text: str, candidate_text: str) -> bool:
    """Numeric-set equality between two renderings (exact decimal compare)."""
    left = {Decimal(tok) for tok in extract_numbers(template_text)}
    right = {Decimal(tok) for tok in extract_numbers(candidate_text)}
    return left == right


def summarize(metrics: list[FlowMetrics] | None = None,
              parsed_log: ParsedEventLog | None = None,
              style: str = "template",
              gateway: LlmGateway | None = None,
              model_id: str = "default") -> str:
    """Render an interpretation report for metrics and/or a timeline.

    ``template`` style is fully deterministic.  ``llm_polished`` passes
    the template output through one gateway call; if the polished text
    does not preserve the numeric set exactly, the template output is
    returned instead.
    """
    parts = []
    if metrics:
        parts.append(summarize_metrics(metrics))
    if parsed_log and parsed_log.events:
        parts.append(summarize_timeline(parsed_log))
    if not parts:
        raise ValueError("nothing to summarize")
    template_text = "\n\n".join(parts)
    if style == "template":
        return template_text
    if style != "llm_polished":
        raise ValueError(f"unknown summary style {style!r}")
    if gateway is None:
        return template_text
    request = LlmRequest(
        messages=(Message("system", SUMMARIZER_SYSTEM_PROMPT),
                  Message("user", template_text)),
        model_id=model_id, temperature=0.0)
    try:
        polished = gateway.complete(request).text
    except Exception as exc:  # noqa: BLE001 - polishing is best-effort
        logger.warning("summary polishing failed (%s); using template", exc)
        return template_text
    if numbers_preserved(template_text, polished):
        return polished
    logger.warning("polished summary dropped or altered numbers; using template")
    return template_text


__all__ = [
    "FlowMetrics", "FlowRecord", "ParsedEventLog", "TimelineEvent",
    "compute_metrics", "numbers_preserved", "numeric_inventory",
    "parse_event_log", "parse_flowmonitor", "round_trip_time", "summarize",
    "summarize_metrics", "summarize_timeline",
]

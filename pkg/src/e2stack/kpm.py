"""KPM service-model schemas and codec.

A minimal REPORT-only schema: event trigger (reporting period), action
definition (style, metric names, granularity), RAN function definition
(report styles and the metrics each exposes), and indication header/message
with node-level or per-UE measurement records.

Measurement values are plain Python values: ``int`` (unsigned 64-bit),
``float`` (binary64) or ``None`` (no value).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .per import (
    CharString,
    Choice,
    Constrained,
    Field,
    Real,
    Sequence,
    SequenceOf,
    UInt64,
    decode_value,
    encode_value,
)

SM_NAME = "KPM"
SM_VERSION = "3.00"

PER_UE_STYLE = 3

# Measurement names offered by the reference gNB under the per-UE style.
REFERENCE_METRICS = (
    "DRB.PdcpSduVolumeDL",
    "DRB.PdcpSduVolumeUL",
    "DRB.RlcSduDelayDl",
    "DRB.UEThpDl",
    "DRB.UEThpUl",
    "RRU.PrbTotDl",
    "RRU.PrbTotUl",
)

MeasValue = Union[int, float, None]


def _tuple(obj, name):
    object.__setattr__(obj, name, tuple(getattr(obj, name)))


@dataclass(frozen=True)
class ReportStyle:
    style_id: int
    metrics: tuple[str, ...] = ()

    def __post_init__(self):
        _tuple(self, "metrics")


@dataclass(frozen=True)
class KpmRanFunctionDefinition:
    function_name: str
    styles: tuple[ReportStyle, ...]

    def __post_init__(self):
        _tuple(self, "styles")

    def style(self, style_id: int) -> ReportStyle | None:
        for s in self.styles:
            if s.style_id == style_id:
                return s
        return None


@dataclass(frozen=True)
class EventTriggerDefinition:
    reporting_period_ms: int


@dataclass(frozen=True)
class ActionDefinition:
    style_id: int
    metrics: tuple[str, ...]
    granularity_period_ms: int

    def __post_init__(self):
        _tuple(self, "metrics")


@dataclass(frozen=True)
class MeasRecord:
    values: tuple[MeasValue, ...]

    def __post_init__(self):
        _tuple(self, "values")


@dataclass(frozen=True)
class IndicationHeader:
    collection_start_time_ms: int
    sender: str


@dataclass(frozen=True)
class NodeLevelMessage:
    records: tuple[MeasRecord, ...]

    def __post_init__(self):
        _tuple(self, "records")


@dataclass(frozen=True)
class UeReport:
    ue_id: str
    records: tuple[MeasRecord, ...]

    def __post_init__(self):
        _tuple(self, "records")


@dataclass(frozen=True)
class PerUeMessage:
    ue_reports: tuple[UeReport, ...] = ()

    def __post_init__(self):
        _tuple(self, "ue_reports")

    def report(self, ue_id: str) -> UeReport | None:
        for r in self.ue_reports:
            if r.ue_id == ue_id:
                return r
        return None


IndicationMessage = Union[NodeLevelMessage, PerUeMessage]


# -- invariants checked on both encode and decode ---------------------------


def _unique(items, what):
    seen = set()
    for x in items:
        if x in seen:
            raise ValueError(f"duplicate {what} {x!r}")
        seen.add(x)


def _check_style(s: ReportStyle):
    _unique(s.metrics, "metric")


def _check_function_definition(d: KpmRanFunctionDefinition):
    ids = [s.style_id for s in d.styles]
    if any(b <= a for a, b in zip(ids, ids[1:])):
        raise ValueError(f"style ids not strictly increasing: {ids}")


def _check_per_ue(m: PerUeMessage):
    _unique((r.ue_id for r in m.ue_reports), "ue_id")


# -- schema ------------------------------------------------------------------

STYLE_ID = Constrained(0, 4)
PERIOD_MS = Constrained(1, 65536)
MEASUREMENT_NAME = CharString(1, 150)


class _NoValue(Field):
    def encode(self, buf, value, name):
        pass

    def decode(self, buf, name):
        return None


MEAS_VALUE = Choice([(int, UInt64()), (float, Real()), (type(None), _NoValue())])
MEAS_RECORD = Sequence(MeasRecord, [("values", SequenceOf(MEAS_VALUE, 0, 64))])

EVENT_TRIGGER = Sequence(EventTriggerDefinition, [("reporting_period_ms", PERIOD_MS)])

ACTION_DEFINITION = Sequence(ActionDefinition, [
    ("style_id", STYLE_ID),
    ("metrics", SequenceOf(MEASUREMENT_NAME, 1, 64)),
    ("granularity_period_ms", PERIOD_MS),
], check=lambda a: _unique(a.metrics, "metric"))

REPORT_STYLE = Sequence(ReportStyle, [
    ("style_id", STYLE_ID),
    ("metrics", SequenceOf(MEASUREMENT_NAME, 0, 64)),
], check=_check_style)

RAN_FUNCTION_DEFINITION = Sequence(KpmRanFunctionDefinition, [
    ("function_name", CharString(1, 150)),
    ("styles", SequenceOf(REPORT_STYLE, 1, 5)),
], check=_check_function_definition)

INDICATION_HEADER = Sequence(IndicationHeader, [
    ("collection_start_time_ms", UInt64()),
    ("sender", CharString(1, 150)),
])

_RECORDS = SequenceOf(MEAS_RECORD, 1, 1024)

UE_REPORT = Sequence(UeReport, [("ue_id", CharString(1, 32)), ("records", _RECORDS)])

INDICATION_MESSAGE = Choice([
    (NodeLevelMessage, Sequence(NodeLevelMessage, [("records", _RECORDS)])),
    (PerUeMessage, Sequence(PerUeMessage, [("ue_reports", SequenceOf(UE_REPORT, 0, 64))],
                            check=_check_per_ue)),
])


def encode_event_trigger(t: EventTriggerDefinition) -> bytes:
    return encode_value(EVENT_TRIGGER, t, "event_trigger")


def decode_event_trigger(data: bytes) -> EventTriggerDefinition:
    return decode_value(EVENT_TRIGGER, data, "event_trigger")


def encode_action_definition(a: ActionDefinition) -> bytes:
    return encode_value(ACTION_DEFINITION, a, "action_definition")


def decode_action_definition(data: bytes) -> ActionDefinition:
    return decode_value(ACTION_DEFINITION, data, "action_definition")


def encode_ran_function_definition(d: KpmRanFunctionDefinition) -> bytes:
    return encode_value(RAN_FUNCTION_DEFINITION, d, "ran_function_definition")


def decode_ran_function_definition(data: bytes) -> KpmRanFunctionDefinition:
    return decode_value(RAN_FUNCTION_DEFINITION, data, "ran_function_definition")


def encode_indication_header(h: IndicationHeader) -> bytes:
    return encode_value(INDICATION_HEADER, h, "indication_header")


def decode_indication_header(data: bytes) -> IndicationHeader:
    return decode_value(INDICATION_HEADER, data, "indication_header")


def encode_indication_message(m: IndicationMessage) -> bytes:
    return encode_value(INDICATION_MESSAGE, m, "indication_message")


def decode_indication_message(data: bytes) -> IndicationMessage:
    return decode_value(INDICATION_MESSAGE, data, "indication_message")


def function_definition_summary(d: KpmRanFunctionDefinition) -> dict[int, list[str]]:
    """``{style_id: [metric, ...]}`` in declaration order."""
    return {s.style_id: list(s.metrics) for s in d.styles}


def reference_function_definition() -> KpmRanFunctionDefinition:
    """Function definition advertised by the simulated gNB.

    Styles 0..4 are present; only the per-UE style carries metrics.
    """
    return KpmRanFunctionDefinition(
        function_name="ORAN-E2SM-KPM",
        styles=[
            ReportStyle(i, REFERENCE_METRICS if i == PER_UE_STYLE else ())
            for i in range(5)
        ],
    )


def message_records(m: IndicationMessage) -> list[MeasRecord]:
    if isinstance(m, NodeLevelMessage):
        return list(m.records)
    return [rec for r in m.ue_reports for rec in r.records]


class KpmCodec:
    """KPM codec exposed through the service-model registry."""

    def __init__(self, sm_name: str = SM_NAME, version: str = SM_VERSION):
        self.sm_name = sm_name
        self.version = version

    def __repr__(self):
        return f"KpmCodec({self.sm_name!r}, {self.version!r})"

    decode_function_definition = staticmethod(decode_ran_function_definition)
    encode_function_definition = staticmethod(encode_ran_function_definition)
    summary = staticmethod(function_definition_summary)
    encode_event_trigger = staticmethod(encode_event_trigger)
    decode_event_trigger = staticmethod(decode_event_trigger)
    encode_action_definition = staticmethod(encode_action_definition)
    decode_action_definition = staticmethod(decode_action_definition)
    encode_indication_header = staticmethod(encode_indication_header)
    decode_indication_header = staticmethod(decode_indication_header)
    encode_indication_message = staticmethod(encode_indication_message)
    decode_indication_message = staticmethod(decode_indication_message)

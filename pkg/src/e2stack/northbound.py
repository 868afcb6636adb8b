"""Message family spoken between xApps and the RIC (type codes 100 and up).

Uses the same framing as E2AP; service-model payloads are carried as
uppercase hex text, the form in which the RIC stores them.
"""
from __future__ import annotations

from dataclasses import dataclass

from .e2ap import (
    CAUSE,
    FUNCTION_ID,
    MAX_PAYLOAD,
    OCTETS,
    REQUEST_ID,
    U32,
    Cause,
    RicRequestId,
    Verdict,
    _tuples,
    message,
)
from .per import Boolean, CharString, Enumerated, Sequence, SequenceOf

NAME = CharString(0, 150)
HEX = CharString(0, 2 * MAX_PAYLOAD)

NO_REQUEST = RicRequestId(0, 0)


@message(100, [("xapp_id", CharString(1, 150))])
@dataclass(frozen=True)
class XAppRegister:
    xapp_id: str


@message(101, [])
@dataclass(frozen=True)
class InventoryRequest:
    pass


@message(102, [("records_json", OCTETS)])
@dataclass(frozen=True)
class InventoryResponse:
    records_json: bytes


@message(103, [("node", NAME)])
@dataclass(frozen=True)
class FunctionDefsRequest:
    node: str


@dataclass(frozen=True)
class FunctionDefEntry:
    ran_function_id: int
    definition_hex: str
    sm_name: str
    version: str


@message(104, [("functions", SequenceOf(Sequence(FunctionDefEntry, [
    ("ran_function_id", FUNCTION_ID),
    ("definition_hex", HEX),
    ("sm_name", NAME),
    ("version", NAME),
]), 0, 4096))])
@dataclass(frozen=True)
class FunctionDefsResponse:
    functions: tuple[FunctionDefEntry, ...]
    __post_init__ = _tuples("functions")


@message(105, [
    ("node", NAME),
    ("ran_function_id", FUNCTION_ID),
    ("event_trigger_hex", HEX),
    ("action_hex", HEX),
])
@dataclass(frozen=True)
class SubscribeRequest:
    node: str
    ran_function_id: int
    event_trigger_hex: str
    action_hex: str


@message(106, [("request_id", REQUEST_ID), ("admitted", Boolean()), ("cause", CAUSE)])
@dataclass(frozen=True)
class SubscribeResponse:
    request_id: RicRequestId
    admitted: bool
    cause: Cause = Cause.UNSPECIFIED


@message(107, [
    ("request_id", REQUEST_ID),
    ("sn", U32),
    ("verdict", Enumerated(Verdict)),
    ("header_hex", HEX),
    ("message_hex", HEX),
])
@dataclass(frozen=True)
class IndicationForward:
    request_id: RicRequestId
    sn: int
    verdict: Verdict
    header_hex: str
    message_hex: str


@message(108, [
    ("node", NAME),
    ("ran_function_id", FUNCTION_ID),
    ("header_hex", HEX),
    ("message_hex", HEX),
])
@dataclass(frozen=True)
class ControlForward:
    node: str
    ran_function_id: int
    header_hex: str
    message_hex: str


@message(109, [("acked", Boolean())])
@dataclass(frozen=True)
class ControlResult:
    acked: bool


@message(110, [("request_id", REQUEST_ID)])
@dataclass(frozen=True)
class SubscriptionDeleteRequest:
    request_id: RicRequestId


@message(111, [("request_id", REQUEST_ID)])
@dataclass(frozen=True)
class SubscriptionDeleteResponse:
    request_id: RicRequestId


@message(112, [("accepted", Boolean()), ("cause", CAUSE)])
@dataclass(frozen=True)
class XAppRegisterResponse:
    accepted: bool
    cause: Cause = Cause.UNSPECIFIED


@message(113, [("request_id", REQUEST_ID), ("cause", CAUSE)])
@dataclass(frozen=True)
class SubscriptionClosed:
    """Unsolicited: the RIC closed a subscription (e.g. its node went away)."""

    request_id: RicRequestId
    cause: Cause


# replies the xApp side waits for; everything else is unsolicited
REPLY_TYPES = (
    XAppRegisterResponse,
    InventoryResponse,
    FunctionDefsResponse,
    SubscribeResponse,
    ControlResult,
    SubscriptionDeleteResponse,
)

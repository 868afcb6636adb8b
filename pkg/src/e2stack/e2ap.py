"""E2AP message set, stream framing and subscription procedures.

Frame layout (big-endian)::

    length: u32   payload length including the type octet
    type:   u8
    payload       fields in declaration order, per-codec encoded, zero padded

Service-model payloads travel as opaque octet strings at this layer.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .per import (
    Boolean,
    CharString,
    CodecError,
    Constrained,
    Enumerated,
    FixedOctets,
    MalformedError,
    OctetString,
    Sequence,
    SequenceOf,
    TruncationError,
    decode_value,
    encode_value,
)

MAX_PAYLOAD = 1 << 24
HEADER = struct.Struct(">IB")


class ProtocolError(CodecError):
    pass


class FrameError(CodecError):
    pass


class Cause(enum.IntEnum):
    UNSPECIFIED = 0
    UNSUPPORTED_FUNCTION = 1
    UNKNOWN_METRIC = 2
    NODE_OVERLOAD = 3
    NODE_UNAVAILABLE = 4
    NODE_DISCONNECTED = 5
    UNKNOWN_REQUEST = 6
    DUPLICATE_XAPP = 7

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


# -- identities ----------------------------------------------------------------


class PlmnError(ValueError):
    pass


def encode_plmn(mcc: str, mnc: str) -> bytes:
    """Pack MCC/MNC digit strings into the 3-octet BCD layout."""
    if len(mcc) != 3 or not mcc.isdigit():
        raise PlmnError(f"bad MCC {mcc!r}")
    if len(mnc) not in (2, 3) or not mnc.isdigit():
        raise PlmnError(f"bad MNC {mnc!r}")
    m = [int(c) for c in mcc]
    n = [int(c) for c in mnc]
    mnc3 = n[2] if len(n) == 3 else 0xF
    return bytes([m[1] << 4 | m[0], mnc3 << 4 | m[2], n[1] << 4 | n[0]])


def decode_plmn(plmn: bytes) -> tuple[str, str]:
    """Inverse of :func:`encode_plmn`; returns ``(mcc, mnc)`` digit strings."""
    if len(plmn) != 3:
        raise PlmnError("PLMN must be 3 octets")
    o1, o2, o3 = plmn
    mcc = [o1 & 0xF, o1 >> 4, o2 & 0xF]
    mnc3 = o2 >> 4
    mnc = [o3 & 0xF, o3 >> 4] + ([] if mnc3 == 0xF else [mnc3])
    if any(d > 9 for d in mcc + mnc):
        raise PlmnError(f"non-BCD digit in PLMN {plmn.hex().upper()}")
    return "".join(map(str, mcc)), "".join(map(str, mnc))


@dataclass(frozen=True)
class GlobalE2NodeId:
    plmn: bytes
    gnb_id: int

    @classmethod
    def from_hex(cls, plmn_hex: str, gnb_id: int) -> "GlobalE2NodeId":
        return cls(bytes.fromhex(plmn_hex), gnb_id)

    @property
    def plmn_hex(self) -> str:
        return self.plmn.hex().upper()

    @property
    def nb_id_bits(self) -> str:
        return f"{self.gnb_id:032b}"

    @property
    def inventory_name(self) -> str:
        mcc, mnc = decode_plmn(self.plmn)
        return f"gnb_{mcc}_{int(mnc):03d}_{self.gnb_id:08x}"


@dataclass(frozen=True, order=True)
class RicRequestId:
    requestor_id: int
    instance_id: int

    def __str__(self):
        return f"({self.requestor_id},{self.instance_id})"


# -- message registry ----------------------------------------------------------

_BY_CODE: dict[int, tuple[type, Sequence]] = {}
_CODE_OF: dict[type, int] = {}


def message(code: int, fields, check=None):
    """Class decorator binding a message dataclass to its type code and fields."""

    def wrap(cls):
        if code in _BY_CODE:
            raise ValueError(f"type code {code} already bound")
        cls.TYPE_CODE = code
        _BY_CODE[code] = (cls, Sequence(cls, fields, check))
        _CODE_OF[cls] = code
        return cls

    return wrap


def message_types() -> dict[int, type]:
    return {code: cls for code, (cls, _) in _BY_CODE.items()}


U8 = Constrained(0, 255)
U16 = Constrained(0, 0xFFFF)
U32 = Constrained(0, 0xFFFFFFFF)
FUNCTION_ID = Constrained(0, 4095)
OCTETS = OctetString(0, MAX_PAYLOAD - 1)
CAUSE = Enumerated(Cause)
REQUEST_ID = Sequence(RicRequestId, [("requestor_id", U16), ("instance_id", U16)])
NODE_ID = Sequence(GlobalE2NodeId, [("plmn", FixedOctets(3)), ("gnb_id", U32)])


@dataclass(frozen=True)
class RanFunctionItem:
    ran_function_id: int
    definition: bytes
    revision: int = 0
    sm_name: str = ""
    sm_version: str = ""


@dataclass(frozen=True)
class RejectedFunction:
    ran_function_id: int
    cause: Cause


@dataclass(frozen=True)
class RicAction:
    action_id: int
    definition: bytes


@dataclass(frozen=True)
class NotAdmittedAction:
    action_id: int
    cause: Cause


def _tuples(*names):
    def post_init(self):
        for n in names:
            object.__setattr__(self, n, tuple(getattr(self, n)))
    return post_init


def _unique_ids(attr, key):
    def check(msg):
        ids = [getattr(x, key) for x in getattr(msg, attr)]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate {key} in {attr}")
    return check


RAN_FUNCTION = Sequence(RanFunctionItem, [
    ("ran_function_id", FUNCTION_ID),
    ("definition", OCTETS),
    ("revision", Constrained(0, 4095)),
    ("sm_name", CharString(0, 150)),
    ("sm_version", CharString(0, 150)),
])


@message(1, [("node_id", NODE_ID), ("functions", SequenceOf(RAN_FUNCTION, 1, 256))])
@dataclass(frozen=True)
class E2SetupRequest:
    node_id: GlobalE2NodeId
    functions: tuple[RanFunctionItem, ...]
    __post_init__ = _tuples("functions")


@message(2, [
    ("accepted_ids", SequenceOf(FUNCTION_ID, 0, 256)),
    ("rejected_ids", SequenceOf(Sequence(RejectedFunction, [
        ("ran_function_id", FUNCTION_ID), ("cause", CAUSE)]), 0, 256)),
])
@dataclass(frozen=True)
class E2SetupResponse:
    accepted_ids: tuple[int, ...]
    rejected_ids: tuple[RejectedFunction, ...] = ()
    __post_init__ = _tuples("accepted_ids", "rejected_ids")


@message(3, [("cause", CAUSE)])
@dataclass(frozen=True)
class E2SetupFailure:
    cause: Cause


ACTION = Sequence(RicAction, [("action_id", U8), ("definition", OCTETS)])


@message(4, [
    ("request_id", REQUEST_ID),
    ("ran_function_id", FUNCTION_ID),
    ("event_trigger", OCTETS),
    ("actions", SequenceOf(ACTION, 1, 16)),
], check=_unique_ids("actions", "action_id"))
@dataclass(frozen=True)
class RicSubscriptionRequest:
    request_id: RicRequestId
    ran_function_id: int
    event_trigger: bytes
    actions: tuple[RicAction, ...]
    __post_init__ = _tuples("actions")


@message(5, [
    ("request_id", REQUEST_ID),
    ("admitted_action_ids", SequenceOf(U8, 0, 16)),
    ("not_admitted", SequenceOf(Sequence(NotAdmittedAction, [
        ("action_id", U8), ("cause", CAUSE)]), 0, 16)),
])
@dataclass(frozen=True)
class RicSubscriptionResponse:
    request_id: RicRequestId
    admitted_action_ids: tuple[int, ...]
    not_admitted: tuple[NotAdmittedAction, ...] = ()
    __post_init__ = _tuples("admitted_action_ids", "not_admitted")


@message(6, [("request_id", REQUEST_ID), ("cause", CAUSE)])
@dataclass(frozen=True)
class RicSubscriptionFailure:
    request_id: RicRequestId
    cause: Cause


@message(7, [
    ("request_id", REQUEST_ID),
    ("action_id", U8),
    ("sequence_number", U32),
    ("header", OCTETS),
    ("message", OCTETS),
])
@dataclass(frozen=True)
class RicIndication:
    request_id: RicRequestId
    action_id: int
    sequence_number: int
    header: bytes
    message: bytes


@message(8, [("request_id", REQUEST_ID)])
@dataclass(frozen=True)
class RicSubscriptionDeleteRequest:
    request_id: RicRequestId


@message(9, [("request_id", REQUEST_ID)])
@dataclass(frozen=True)
class RicSubscriptionDeleteResponse:
    request_id: RicRequestId


@message(10, [
    ("request_id", REQUEST_ID),
    ("ran_function_id", FUNCTION_ID),
    ("header", OCTETS),
    ("message", OCTETS),
    ("ack_requested", Boolean()),
])
@dataclass(frozen=True)
class RicControlRequest:
    request_id: RicRequestId
    ran_function_id: int
    header: bytes
    message: bytes
    ack_requested: bool = True


@message(11, [("request_id", REQUEST_ID)])
@dataclass(frozen=True)
class RicControlAcknowledge:
    request_id: RicRequestId


@message(12, [("cause", CAUSE)])
@dataclass(frozen=True)
class ErrorIndication:
    cause: Cause


E2AP_TYPE_CODES = tuple(range(1, 13))


# -- framing -------------------------------------------------------------------


def frame(msg) -> bytes:
    try:
        code = _CODE_OF[type(msg)]
    except KeyError:
        raise FrameError(f"not a framed message type: {type(msg).__name__}") from None
    _, schema = _BY_CODE[code]
    payload = encode_value(schema, msg, type(msg).__name__)
    if len(payload) + 1 > MAX_PAYLOAD:
        raise FrameError(f"payload of {len(payload)} octets exceeds 2^24")
    return HEADER.pack(len(payload) + 1, code) + payload


def parse_frame(data: bytes, offset: int = 0):
    """Decode one frame starting at ``offset``; returns ``(message, next_offset)``.

    Bytes beyond the declared frame length are left alone.
    """
    avail = len(data) - offset
    if avail >= 4:
        (length,) = struct.unpack_from(">I", data, offset)
        if length == 0:
            raise FrameError("zero frame length")
        if length > MAX_PAYLOAD:
            raise FrameError(f"declared length {length} exceeds 2^24")
    if avail < HEADER.size:
        raise TruncationError("frame.header", 8 * HEADER.size, 8 * max(avail, 0))
    length, code = HEADER.unpack_from(data, offset)
    if code not in _BY_CODE:
        raise ProtocolError(f"unknown message type {code}")
    end = offset + 4 + length
    if end > len(data):
        raise TruncationError("frame.payload", 8 * (length - 1),
                              8 * (len(data) - offset - HEADER.size))
    cls, schema = _BY_CODE[code]
    msg = decode_value(schema, bytes(data[offset + HEADER.size:end]), cls.__name__)
    return msg, end


def parse(data: bytes):
    msg, _ = parse_frame(data)
    return msg


class FrameReader:
    """Incremental splitter for a byte stream carrying back-to-back frames.

    A frame that fails to decode is consumed before the error is raised, so
    the caller can log it and keep reading.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> None:
        self._buf += data

    def next_message(self):
        if len(self._buf) < 4:
            return None
        (length,) = struct.unpack_from(">I", self._buf)
        if length == 0 or length > MAX_PAYLOAD:
            raise FrameError(f"declared frame length {length} out of range")
        if len(self._buf) < 4 + length:
            return None
        chunk = bytes(self._buf[:4 + length])
        del self._buf[:4 + length]
        return parse(chunk)

    @property
    def pending(self) -> int:
        return len(self._buf)


# -- subscription procedure ------------------------------------------------------


class SubscriptionState(enum.Enum):
    IDLE = "Idle"
    PENDING = "Pending"
    ACTIVE = "Active"
    DELETING = "Deleting"
    CLOSED = "Closed"


class SubEvent(enum.Enum):
    SEND_SUB_REQ = "SendSubReq"
    RECV_SUB_RESP_ADMITTED = "RecvSubResp(admitted)"
    RECV_SUB_RESP_REJECTED = "RecvSubResp(none admitted)"
    RECV_SUB_FAIL = "RecvSubFail"
    RECV_INDICATION = "RecvIndication"
    SEND_DEL_REQ = "SendDelReq"
    RECV_DEL_RESP = "RecvDelResp"
    PEER_DISCONNECT = "PeerDisconnect"


class SubAction(enum.Enum):
    EMIT_SUB_REQ = RicSubscriptionRequest.TYPE_CODE
    EMIT_DEL_REQ = RicSubscriptionDeleteRequest.TYPE_CODE
    DELIVER = "deliver"
    NOTIFY_ADMITTED = "notify-admitted"
    NOTIFY_REFUSED = "notify-refused"
    NOTIFY_CLOSED = "notify-closed"
    PROTOCOL_VIOLATION = "protocol-violation"


S, E, A = SubscriptionState, SubEvent, SubAction

_TRANSITIONS = {
    (S.IDLE, E.SEND_SUB_REQ): (S.PENDING, (A.EMIT_SUB_REQ,)),
    (S.PENDING, E.RECV_SUB_RESP_ADMITTED): (S.ACTIVE, (A.NOTIFY_ADMITTED,)),
    (S.PENDING, E.RECV_SUB_RESP_REJECTED): (S.CLOSED, (A.NOTIFY_REFUSED,)),
    (S.PENDING, E.RECV_SUB_FAIL): (S.CLOSED, (A.NOTIFY_REFUSED,)),
    (S.ACTIVE, E.RECV_INDICATION): (S.ACTIVE, (A.DELIVER,)),
    (S.ACTIVE, E.SEND_DEL_REQ): (S.DELETING, (A.EMIT_DEL_REQ,)),
    # indications already in flight when the delete went out are still delivered
    (S.DELETING, E.RECV_INDICATION): (S.DELETING, (A.DELIVER,)),
    (S.DELETING, E.RECV_DEL_RESP): (S.CLOSED, (A.NOTIFY_CLOSED,)),
}


def subscription_transition(state: SubscriptionState, event: SubEvent):
    """Return ``(next_state, actions)``.  Illegal pairs leave the state unchanged."""
    if event is SubEvent.PEER_DISCONNECT:
        if state is SubscriptionState.CLOSED:
            return state, ()
        return SubscriptionState.CLOSED, (SubAction.NOTIFY_CLOSED,)
    try:
        return _TRANSITIONS[(state, event)]
    except KeyError:
        return state, (SubAction.PROTOCOL_VIOLATION,)


del S, E, A


class Verdict(enum.IntEnum):
    OK = 0
    GAP = 1
    DUPLICATE = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass
class SequenceTracker:
    """Per-subscription indication sequence-number state."""

    last_sn: int = -1
    gaps: int = 0
    duplicates: int = 0


def validate_indication_sn(tracker: SequenceTracker, sn: int) -> Verdict:
    if sn == tracker.last_sn + 1:
        tracker.last_sn = sn
        return Verdict.OK
    if sn <= tracker.last_sn:
        tracker.duplicates += 1
        return Verdict.DUPLICATE
    tracker.gaps += 1
    return Verdict.GAP


def is_protocol_violation(actions) -> bool:
    return SubAction.PROTOCOL_VIOLATION in actions


__all__ = [
    "Cause", "GlobalE2NodeId", "RicRequestId", "RanFunctionItem", "RejectedFunction",
    "RicAction", "NotAdmittedAction", "E2SetupRequest", "E2SetupResponse",
    "E2SetupFailure", "RicSubscriptionRequest", "RicSubscriptionResponse",
    "RicSubscriptionFailure", "RicIndication", "RicSubscriptionDeleteRequest",
    "RicSubscriptionDeleteResponse", "RicControlRequest", "RicControlAcknowledge",
    "ErrorIndication", "frame", "parse", "parse_frame", "FrameReader",
    "SubscriptionState", "SubEvent", "SubAction", "subscription_transition",
    "Verdict", "SequenceTracker", "validate_indication_sn", "encode_plmn",
    "decode_plmn", "ProtocolError", "FrameError", "MalformedError",
]

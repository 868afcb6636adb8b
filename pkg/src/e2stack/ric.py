"""Near-RT RIC simulator core.

The :class:`Ric` is transport-agnostic: drivers hand it decoded messages
tagged with an opaque connection handle and send back whatever it returns.
Nodes identify themselves with an ``E2SetupRequest``, xApps with an
``XAppRegister``.
"""
from __future__ import annotations

import copy
import json
import logging
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable

from . import northbound as nb
from .e2ap import (
    Cause,
    E2SetupFailure,
    E2SetupRequest,
    E2SetupResponse,
    ErrorIndication,
    GlobalE2NodeId,
    PlmnError,
    RejectedFunction,
    RicAction,
    RicControlAcknowledge,
    RicControlRequest,
    RicIndication,
    RicRequestId,
    RicSubscriptionDeleteRequest,
    RicSubscriptionDeleteResponse,
    RicSubscriptionFailure,
    RicSubscriptionRequest,
    RicSubscriptionResponse,
    SequenceTracker,
    SubAction,
    SubEvent,
    SubscriptionState,
    subscription_transition,
    validate_indication_sn,
)
from .per import CodecError, from_hex, to_hex
from .registry import OPAQUE, SmCodecKey, SmRegistry, default_registry

log = logging.getLogger(__name__)

CONNECTED = "CONNECTED"
DISCONNECTED = "DISCONNECTED"

Conn = Hashable
Outputs = list  # [(conn, message), ...]


@dataclass
class FunctionRecord:
    definition_hex: str
    revision: int
    sm_name: str = ""
    sm_version: str = ""

    @property
    def key(self) -> SmCodecKey | None:
        return SmCodecKey(self.sm_name, self.sm_version) if self.sm_name else None


@dataclass
class NodeRecord:
    inventory_name: str
    global_id: GlobalE2NodeId
    connection_status: str
    functions: dict[int, FunctionRecord] = field(default_factory=dict)

    def as_inventory(self) -> dict:
        return {
            "inventoryName": self.inventory_name,
            "globalNbId": {
                "plmnId": self.global_id.plmn_hex,
                "nbId": self.global_id.nb_id_bits,
            },
            "connectionStatus": self.connection_status,
        }


@dataclass
class SubscriptionRecord:
    xapp_id: str
    node: str
    request_id: RicRequestId
    ran_function_id: int
    action_id: int
    state: SubscriptionState = SubscriptionState.IDLE
    tracker: SequenceTracker = field(default_factory=SequenceTracker)


class Ric:
    def __init__(self, registry: SmRegistry | None = None):
        self.registry = registry if registry is not None else default_registry()
        self.lock = threading.RLock()
        self.nodes: dict[str, NodeRecord] = {}
        self.subscriptions: dict[RicRequestId, SubscriptionRecord] = {}
        self.counters: Counter = Counter()
        self.history: list[tuple[str, Conn, Any]] = []
        self._node_conn: dict[str, Conn] = {}
        self._conn_node: dict[Conn, str] = {}
        self._xapp_conn: dict[str, Conn] = {}
        self._conn_xapp: dict[Conn, str] = {}
        self._requestor_ids: dict[str, int] = {}
        self._next_instance: dict[str, int] = {}
        self._controls: dict[RicRequestId, tuple[Conn, str]] = {}

    # -- driver entry points ------------------------------------------------

    def receive(self, conn: Conn, msg) -> Outputs:
        with self.lock:
            self.history.append(("msg", conn, msg))
            handler = self._HANDLERS.get(type(msg))
            if handler is None:
                log.warning("unexpected %s from %r", type(msg).__name__, conn)
                self.counters["unexpected_messages"] += 1
                return [(conn, ErrorIndication(Cause.UNSPECIFIED))]
            return handler(self, conn, msg)

    def connection_lost(self, conn: Conn) -> Outputs:
        with self.lock:
            self.history.append(("lost", conn, None))
            if conn in self._conn_node:
                return self.handle_node_disconnect(self._conn_node[conn])
            if conn in self._conn_xapp:
                return self._xapp_gone(conn)
            return []

    @classmethod
    def replay(cls, history: Iterable, registry: SmRegistry | None = None) -> "Ric":
        ric = cls(registry)
        for kind, conn, msg in history:
            if kind == "msg":
                ric.receive(conn, msg)
            else:
                ric.connection_lost(conn)
        return ric

    # -- inventory ------------------------------------------------------------

    def inventory_snapshot(self) -> list[dict]:
        with self.lock:
            return [copy.deepcopy(n.as_inventory()) for n in self.nodes.values()]

    def inventory_json(self) -> str:
        return json.dumps(self.inventory_snapshot(), indent=2)

    def node_conn(self, name: str) -> Conn | None:
        return self._node_conn.get(name)

    def _live_node(self, name: str) -> NodeRecord | None:
        rec = self.nodes.get(name)
        if rec is None or rec.connection_status != CONNECTED:
            return None
        return rec

    # -- south: E2 nodes ------------------------------------------------------

    def handle_setup(self, conn: Conn, req: E2SetupRequest) -> Outputs:
        try:
            name = req.node_id.inventory_name
        except PlmnError as exc:
            log.warning("setup rejected: %s", exc)
            return [(conn, E2SetupFailure(Cause.UNSPECIFIED))]
        accepted, rejected, functions = [], [], {}
        for item in req.functions:
            if item.ran_function_id in functions:
                rejected.append(RejectedFunction(item.ran_function_id, Cause.UNSPECIFIED))
                continue
            functions[item.ran_function_id] = FunctionRecord(
                to_hex(item.definition), item.revision, item.sm_name, item.sm_version)
            accepted.append(item.ran_function_id)
        old_conn = self._node_conn.get(name)
        if old_conn is not None and old_conn != conn:
            self._conn_node.pop(old_conn, None)
        rec = self.nodes.get(name)
        if rec is None:
            rec = self.nodes[name] = NodeRecord(name, req.node_id, CONNECTED)
        rec.global_id = req.node_id
        rec.connection_status = CONNECTED
        rec.functions = functions
        self._node_conn[name] = conn
        self._conn_node[conn] = name
        log.info("node %s connected with functions %s", name, accepted)
        return [(conn, E2SetupResponse(accepted, rejected))]

    def _sub_event(self, rec: SubscriptionRecord, event: SubEvent):
        rec.state, actions = subscription_transition(rec.state, event)
        if SubAction.PROTOCOL_VIOLATION in actions:
            self.counters["protocol_violations"] += 1
            log.warning("subscription %s: %s in state %s", rec.request_id,
                        event.value, rec.state.value)
        if rec.state is SubscriptionState.CLOSED:
            self.subscriptions.pop(rec.request_id, None)
        return actions

    def _to_xapp(self, xapp_id: str, msg) -> Outputs:
        conn = self._xapp_conn.get(xapp_id)
        return [] if conn is None else [(conn, msg)]

    def _on_sub_response(self, conn, msg: RicSubscriptionResponse) -> Outputs:
        rec = self.subscriptions.get(msg.request_id)
        if rec is None:
            self.counters["unknown_request"] += 1
            return [(conn, ErrorIndication(Cause.UNKNOWN_REQUEST))]
        admitted = bool(msg.admitted_action_ids)
        event = SubEvent.RECV_SUB_RESP_ADMITTED if admitted else SubEvent.RECV_SUB_RESP_REJECTED
        actions = self._sub_event(rec, event)
        if SubAction.NOTIFY_ADMITTED in actions:
            if rec.xapp_id not in self._xapp_conn:
                # subscriber left while pending
                return self._begin_delete(rec)
            return self._to_xapp(rec.xapp_id, nb.SubscribeResponse(rec.request_id, True))
        if SubAction.NOTIFY_REFUSED in actions:
            cause = msg.not_admitted[0].cause if msg.not_admitted else Cause.UNSPECIFIED
            return self._to_xapp(rec.xapp_id, nb.SubscribeResponse(rec.request_id, False, cause))
        return []

    def _on_sub_failure(self, conn, msg: RicSubscriptionFailure) -> Outputs:
        rec = self.subscriptions.get(msg.request_id)
        if rec is None:
            self.counters["unknown_request"] += 1
            return []
        actions = self._sub_event(rec, SubEvent.RECV_SUB_FAIL)
        if SubAction.NOTIFY_REFUSED in actions:
            return self._to_xapp(rec.xapp_id, nb.SubscribeResponse(rec.request_id, False, msg.cause))
        return []

    def route_indication(self, conn: Conn, ind: RicIndication) -> Outputs:
        rec = self.subscriptions.get(ind.request_id)
        if rec is None or self._node_conn.get(rec.node) != conn:
            self.counters["unknown_request"] += 1
            log.warning("indication for unknown request %s", ind.request_id)
            return [(conn, ErrorIndication(Cause.UNKNOWN_REQUEST))]
        actions = self._sub_event(rec, SubEvent.RECV_INDICATION)
        if SubAction.DELIVER not in actions:
            return [(conn, ErrorIndication(Cause.UNSPECIFIED))]
        verdict = validate_indication_sn(rec.tracker, ind.sequence_number)
        self.counters["indications_routed"] += 1
        if verdict.value:
            self.counters[f"sn_{verdict.label}"] += 1
            log.warning("subscription %s: sn %d flagged %s", rec.request_id,
                        ind.sequence_number, verdict.label)
        return self._to_xapp(rec.xapp_id, nb.IndicationForward(
            rec.request_id, ind.sequence_number, verdict,
            to_hex(ind.header), to_hex(ind.message)))

    def _on_delete_response(self, conn, msg: RicSubscriptionDeleteResponse) -> Outputs:
        rec = self.subscriptions.get(msg.request_id)
        if rec is None:
            return []
        actions = self._sub_event(rec, SubEvent.RECV_DEL_RESP)
        if SubAction.NOTIFY_CLOSED in actions:
            return self._to_xapp(rec.xapp_id, nb.SubscriptionDeleteResponse(rec.request_id))
        return []

    def _on_control_ack(self, conn, msg: RicControlAcknowledge) -> Outputs:
        pending = self._controls.pop(msg.request_id, None)
        if pending is None:
            return []
        return [(pending[0], nb.ControlResult(True))]

    def _on_error_indication(self, conn, msg: ErrorIndication) -> Outputs:
        self.counters["error_indications_received"] += 1
        log.warning("error indication from %r: %s", conn, msg.cause.label)
        return []

    def handle_node_disconnect(self, name: str) -> Outputs:
        rec = self.nodes.get(name)
        if rec is None:
            return []
        rec.connection_status = DISCONNECTED
        conn = self._node_conn.pop(name, None)
        self._conn_node.pop(conn, None)
        out: Outputs = []
        for sub in [s for s in self.subscriptions.values() if s.node == name]:
            was_pending = sub.state is SubscriptionState.PENDING
            self._sub_event(sub, SubEvent.PEER_DISCONNECT)
            if was_pending:
                msg = nb.SubscribeResponse(sub.request_id, False, Cause.NODE_DISCONNECTED)
            else:
                msg = nb.SubscriptionClosed(sub.request_id, Cause.NODE_DISCONNECTED)
            out += self._to_xapp(sub.xapp_id, msg)
        for rid, (xconn, node) in list(self._controls.items()):
            if node == name:
                del self._controls[rid]
                out.append((xconn, nb.ControlResult(False)))
        log.info("node %s disconnected; %d subscriber notification(s)", name, len(out))
        return out

    # -- north: xApps -------------------------------------------------------

    def _allocate(self, xapp_id: str) -> RicRequestId:
        instance = self._next_instance[xapp_id]
        self._next_instance[xapp_id] = instance % 0xFFFF + 1
        return RicRequestId(self._requestor_ids[xapp_id], instance)

    def _on_register(self, conn, msg: nb.XAppRegister) -> Outputs:
        if msg.xapp_id in self._xapp_conn or conn in self._conn_xapp:
            return [(conn, nb.XAppRegisterResponse(False, Cause.DUPLICATE_XAPP))]
        self._xapp_conn[msg.xapp_id] = conn
        self._conn_xapp[conn] = msg.xapp_id
        if msg.xapp_id not in self._requestor_ids:
            self._requestor_ids[msg.xapp_id] = len(self._requestor_ids) + 1
            self._next_instance[msg.xapp_id] = 1
        log.info("xApp %s registered", msg.xapp_id)
        return [(conn, nb.XAppRegisterResponse(True))]

    def _xapp_id(self, conn) -> str | None:
        return self._conn_xapp.get(conn)

    def _on_inventory(self, conn, msg) -> Outputs:
        payload = json.dumps([n.as_inventory() for n in self.nodes.values()]).encode()
        return [(conn, nb.InventoryResponse(payload))]

    def _on_function_defs(self, conn, msg: nb.FunctionDefsRequest) -> Outputs:
        rec = self.nodes.get(msg.node)
        entries = []
        if rec is not None:
            for fid, f in sorted(rec.functions.items()):
                entries.append(nb.FunctionDefEntry(fid, f.definition_hex, f.sm_name, f.sm_version))
        return [(conn, nb.FunctionDefsResponse(entries))]

    def _admission_cause(self, fn: FunctionRecord, action_octets: bytes) -> Cause | None:
        """Pre-check requested metrics against the function's declared style."""
        codec = self.registry.resolve(fn.key) if fn.key else None
        if codec is None or codec is OPAQUE:
            return None
        try:
            action = codec.decode_action_definition(action_octets)
            summary = codec.summary(codec.decode_function_definition(from_hex(fn.definition_hex)))
        except CodecError:
            return None
        if action.style_id not in summary:
            return Cause.UNSUPPORTED_FUNCTION
        if not set(action.metrics) <= set(summary[action.style_id]):
            return Cause.UNKNOWN_METRIC
        return None

    def handle_xapp_subscribe(self, conn, msg: nb.SubscribeRequest) -> Outputs:
        xapp_id = self._xapp_id(conn)
        if xapp_id is None:
            return [(conn, nb.SubscribeResponse(nb.NO_REQUEST, False, Cause.UNSPECIFIED))]
        node = self._live_node(msg.node)
        if node is None:
            return [(conn, nb.SubscribeResponse(nb.NO_REQUEST, False, Cause.NODE_UNAVAILABLE))]
        fn = node.functions.get(msg.ran_function_id)
        if fn is None:
            return [(conn, nb.SubscribeResponse(nb.NO_REQUEST, False, Cause.UNSUPPORTED_FUNCTION))]
        try:
            trigger = from_hex(msg.event_trigger_hex)
            action = from_hex(msg.action_hex)
        except CodecError:
            return [(conn, nb.SubscribeResponse(nb.NO_REQUEST, False, Cause.UNSPECIFIED))]
        cause = self._admission_cause(fn, action)
        if cause is not None:
            return [(conn, nb.SubscribeResponse(nb.NO_REQUEST, False, cause))]
        rid = self._allocate(xapp_id)
        rec = SubscriptionRecord(xapp_id, msg.node, rid, msg.ran_function_id, action_id=0)
        self.subscriptions[rid] = rec
        self._sub_event(rec, SubEvent.SEND_SUB_REQ)
        request = RicSubscriptionRequest(rid, msg.ran_function_id, trigger, [RicAction(0, action)])
        return [(self._node_conn[msg.node], request)]

    def _begin_delete(self, rec: SubscriptionRecord) -> Outputs:
        self._sub_event(rec, SubEvent.SEND_DEL_REQ)
        return [(self._node_conn[rec.node], RicSubscriptionDeleteRequest(rec.request_id))]

    def _on_delete_request(self, conn, msg: nb.SubscriptionDeleteRequest) -> Outputs:
        rec = self.subscriptions.get(msg.request_id)
        if rec is None or rec.xapp_id != self._xapp_id(conn):
            return [(conn, nb.SubscriptionDeleteResponse(msg.request_id))]
        if rec.state is not SubscriptionState.ACTIVE:
            self.counters["protocol_violations"] += 1
            return [(conn, nb.SubscriptionDeleteResponse(msg.request_id))]
        return self._begin_delete(rec)

    def _on_control(self, conn, msg: nb.ControlForward) -> Outputs:
        xapp_id = self._xapp_id(conn)
        node = self._live_node(msg.node)
        if xapp_id is None or node is None:
            return [(conn, nb.ControlResult(False))]
        try:
            header, body = from_hex(msg.header_hex), from_hex(msg.message_hex)
        except CodecError:
            return [(conn, nb.ControlResult(False))]
        rid = self._allocate(xapp_id)
        self._controls[rid] = (conn, msg.node)
        req = RicControlRequest(rid, msg.ran_function_id, header, body, ack_requested=True)
        return [(self._node_conn[msg.node], req)]

    def _xapp_gone(self, conn) -> Outputs:
        xapp_id = self._conn_xapp.pop(conn)
        del self._xapp_conn[xapp_id]
        out: Outputs = []
        for rec in [s for s in self.subscriptions.values() if s.xapp_id == xapp_id]:
            if rec.state is SubscriptionState.ACTIVE:
                out += self._begin_delete(rec)
        for rid, (xconn, _) in list(self._controls.items()):
            if xconn == conn:
                del self._controls[rid]
        log.info("xApp %s disconnected", xapp_id)
        return out

    _HANDLERS = {
        E2SetupRequest: handle_setup,
        RicSubscriptionResponse: _on_sub_response,
        RicSubscriptionFailure: _on_sub_failure,
        RicIndication: route_indication,
        RicSubscriptionDeleteResponse: _on_delete_response,
        RicControlAcknowledge: _on_control_ack,
        ErrorIndication: _on_error_indication,
        nb.XAppRegister: _on_register,
        nb.InventoryRequest: _on_inventory,
        nb.FunctionDefsRequest: _on_function_defs,
        nb.SubscribeRequest: handle_xapp_subscribe,
        nb.SubscriptionDeleteRequest: _on_delete_request,
        nb.ControlForward: _on_control,
    }

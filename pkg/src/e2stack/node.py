"""Simulated E2 node (gNB) serving the KPM function from a traffic trace.

The node is sans-IO: ``setup_request()`` starts the association,
``receive(msg)`` handles anything the RIC sends, and ``advance(now_ms)``
emits the indications whose reporting windows have closed by ``now_ms``.
Drivers (:mod:`e2stack.sim`, :mod:`e2stack.net`) own time and transport.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import kpm
from .e2ap import (
    Cause,
    E2SetupRequest,
    E2SetupResponse,
    ErrorIndication,
    GlobalE2NodeId,
    NotAdmittedAction,
    RanFunctionItem,
    RicControlAcknowledge,
    RicControlRequest,
    RicIndication,
    RicRequestId,
    RicSubscriptionDeleteRequest,
    RicSubscriptionDeleteResponse,
    RicSubscriptionFailure,
    RicSubscriptionRequest,
    RicSubscriptionResponse,
)
from .kpm import (
    ActionDefinition,
    IndicationHeader,
    MeasRecord,
    NodeLevelMessage,
    PerUeMessage,
    UeReport,
)
from .per import CodecError
from .traces import TraceRow, TrafficTrace, UeEvent, attachment_intervals

log = logging.getLogger(__name__)

KPM_RAN_FUNCTION_ID = 147
SUPPORTED_METRICS = kpm.REFERENCE_METRICS


@dataclass(frozen=True)
class OverheadModel:
    """Per-packet TCP/IPv4 (40 B) plus PDCP (3 B) header bytes."""

    header_overhead_bytes: int = 43

    def __post_init__(self):
        if self.header_overhead_bytes < 0:
            raise ValueError("header_overhead_bytes must be >= 0")


DEFAULT_MODEL = OverheadModel()


def pdcp_bytes(app_bytes: int, pkts: int, model: OverheadModel = DEFAULT_MODEL) -> int:
    return app_bytes + pkts * model.header_overhead_bytes


def compute_record(rows: Sequence[TraceRow], granularity_ms: int, metrics: Sequence[str],
                   model: OverheadModel = DEFAULT_MODEL,
                   warnings: Counter | None = None) -> MeasRecord:
    """One measurement record for ``rows`` (a single UE, or several summed)."""
    dl = sum(pdcp_bytes(r.dl_app_bytes, r.dl_pkts, model) for r in rows)
    ul = sum(pdcp_bytes(r.ul_app_bytes, r.ul_pkts, model) for r in rows)
    values = []
    for m in metrics:
        if m == "DRB.PdcpSduVolumeDL":
            values.append(dl)
        elif m == "DRB.PdcpSduVolumeUL":
            values.append(ul)
        elif m == "DRB.UEThpDl":
            values.append(dl * 8 / granularity_ms)
        elif m == "DRB.UEThpUl":
            values.append(ul * 8 / granularity_ms)
        elif m == "RRU.PrbTotDl":
            values.append(sum(r.prb_dl for r in rows))
        elif m == "RRU.PrbTotUl":
            values.append(sum(r.prb_ul for r in rows))
        elif m == "DRB.RlcSduDelayDl":
            weight = sum(r.dl_app_bytes for r in rows)
            if weight:
                values.append(sum(r.rlc_delay_dl_ms * r.dl_app_bytes for r in rows) / weight)
            else:
                values.append(None)
        else:
            if warnings is not None:
                warnings[m] += 1
            values.append(None)
    return MeasRecord(values)


def _overlaps(intervals, start, end) -> bool:
    return any(a < end and b > start for a, b in intervals)


def build_indication(trace: TrafficTrace, attachments: dict, action: ActionDefinition,
                     window_start: int, period_ms: int, sender: str,
                     model: OverheadModel = DEFAULT_MODEL,
                     warnings: Counter | None = None):
    """Header and message for the reporting window ``[window_start, +period_ms)``.

    Per-UE style: one report per UE attached during any part of the window,
    each with ``period_ms / granularity`` records.  Other styles aggregate
    all attached UEs into node-level records.
    """
    g = action.granularity_period_ms
    if period_ms % g:
        raise ValueError(f"granularity {g} does not divide period {period_ms}")
    window_end = window_start + period_ms
    ues = [ue for ue, iv in sorted(attachments.items())
           if _overlaps(iv, window_start, window_end)]
    bins = [(window_start + i * g, window_start + (i + 1) * g) for i in range(period_ms // g)]
    header = IndicationHeader(window_start, sender)
    if action.style_id == kpm.PER_UE_STYLE:
        reports = [
            UeReport(ue, [compute_record(trace.rows_for(ue, a, b), g, action.metrics,
                                         model, warnings) for a, b in bins])
            for ue in ues
        ]
        return header, PerUeMessage(reports)
    records = [
        compute_record([r for ue in ues for r in trace.rows_for(ue, a, b)], g,
                       action.metrics, model, warnings)
        for a, b in bins
    ]
    return header, NodeLevelMessage(records)


@dataclass
class NodeSubscription:
    request_id: RicRequestId
    period_ms: int
    actions: list[tuple[int, ActionDefinition]]
    next_start: int
    sn: int = 0

    @property
    def next_emit(self) -> int:
        return self.next_start + self.period_ms


class E2NodeSim:
    def __init__(self, node_id: GlobalE2NodeId, trace: TrafficTrace,
                 ue_events: Iterable[UeEvent] = (), model: OverheadModel = DEFAULT_MODEL,
                 ran_function_id: int = KPM_RAN_FUNCTION_ID,
                 definition: kpm.KpmRanFunctionDefinition | None = None,
                 report_offset_ms: int = 0, end_ms: int | None = None):
        self.node_id = node_id
        self.name = node_id.inventory_name
        self.trace = trace
        self.model = model
        self.ran_function_id = ran_function_id
        self.definition = definition or kpm.reference_function_definition()
        self.report_offset_ms = report_offset_ms
        self.end_ms = trace.end_ms if end_ms is None else end_ms
        self.attachments = attachment_intervals(ue_events, trace.ue_ids)
        self.now = 0
        self.subscriptions: dict[RicRequestId, NodeSubscription] = {}
        self.control_log: list[tuple[int, bytes, bytes]] = []
        self.sent: list[tuple[int, object]] = []
        self.setup_accepted: bool | None = None
        self.warnings: Counter = Counter()
        self.errors_received: list[Cause] = []

    def setup_request(self) -> E2SetupRequest:
        item = RanFunctionItem(
            self.ran_function_id,
            kpm.encode_ran_function_definition(self.definition),
            revision=1, sm_name=kpm.SM_NAME, sm_version=kpm.SM_VERSION)
        return self._out([E2SetupRequest(self.node_id, [item])])[0]

    def _out(self, msgs):
        for m in msgs:
            self.sent.append((self.now, m))
        return msgs

    @property
    def indications(self) -> list[RicIndication]:
        return [m for _, m in self.sent if isinstance(m, RicIndication)]

    # -- incoming ------------------------------------------------------------

    def receive(self, msg) -> list:
        if isinstance(msg, E2SetupResponse):
            self.setup_accepted = self.ran_function_id in msg.accepted_ids
            return []
        if isinstance(msg, RicSubscriptionRequest):
            return self._out(self._admit(msg))
        if isinstance(msg, RicSubscriptionDeleteRequest):
            self.subscriptions.pop(msg.request_id, None)
            return self._out([RicSubscriptionDeleteResponse(msg.request_id)])
        if isinstance(msg, RicControlRequest):
            self.control_log.append((self.now, msg.header, msg.message))
            if msg.ack_requested:
                return self._out([RicControlAcknowledge(msg.request_id)])
            return []
        if isinstance(msg, ErrorIndication):
            self.errors_received.append(msg.cause)
            return []
        log.debug("%s ignoring %s", self.name, type(msg).__name__)
        return []

    def _admit(self, req: RicSubscriptionRequest) -> list:
        if req.ran_function_id != self.ran_function_id:
            return [RicSubscriptionFailure(req.request_id, Cause.UNSUPPORTED_FUNCTION)]
        try:
            period = kpm.decode_event_trigger(req.event_trigger).reporting_period_ms
        except CodecError:
            return [RicSubscriptionFailure(req.request_id, Cause.UNSPECIFIED)]
        admitted, refused = [], []
        for act in req.actions:
            cause = None
            try:
                action = kpm.decode_action_definition(act.definition)
            except CodecError:
                cause = Cause.UNSPECIFIED
            else:
                style = self.definition.style(action.style_id)
                if style is None:
                    cause = Cause.UNSUPPORTED_FUNCTION
                elif not set(action.metrics) <= set(style.metrics):
                    cause = Cause.UNKNOWN_METRIC
                elif period % action.granularity_period_ms:
                    cause = Cause.UNSPECIFIED
            if cause is None:
                admitted.append((act.action_id, action))
            else:
                refused.append(NotAdmittedAction(act.action_id, cause))
        if not admitted:
            return [RicSubscriptionFailure(req.request_id, refused[0].cause)]
        self.subscriptions[req.request_id] = NodeSubscription(
            req.request_id, period, admitted, self.now + self.report_offset_ms)
        return [RicSubscriptionResponse(req.request_id, [a for a, _ in admitted], refused)]

    # -- time ------------------------------------------------------------------

    def next_deadline(self) -> int | None:
        due = [s.next_emit for s in self.subscriptions.values() if s.next_emit <= self.end_ms]
        return min(due, default=None)

    @property
    def finished(self) -> bool:
        return self.now >= self.end_ms

    def advance(self, now: int) -> list:
        """Emit every indication whose window closes at or before ``now``."""
        out = []
        while True:
            due = sorted((s.next_emit, s.request_id) for s in self.subscriptions.values()
                         if s.next_emit <= min(now, self.end_ms))
            if not due:
                break
            t, rid = due[0]
            self.now = max(self.now, t)
            out += self._out(self._emit(self.subscriptions[rid]))
        self.now = max(self.now, now)
        return out

    def _emit(self, sub: NodeSubscription) -> list[RicIndication]:
        out = []
        for action_id, action in sub.actions:
            header, message = build_indication(
                self.trace, self.attachments, action, sub.next_start, sub.period_ms,
                self.name, self.model, self.warnings)
            out.append(RicIndication(
                sub.request_id, action_id, sub.sn,
                kpm.encode_indication_header(header),
                kpm.encode_indication_message(message)))
            sub.sn += 1
        sub.next_start += sub.period_ms
        return out

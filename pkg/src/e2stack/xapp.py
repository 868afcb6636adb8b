"""xApp SDK: node discovery, KPM subscription, decoded indication callbacks
and opaque control messages, on top of the RIC northbound protocol.

Two usage styles are supported.  Subclass :class:`XappContext` and override
:meth:`XappContext.logic`, or build a plain context and pass a callable to
:meth:`XappContext.run`.
"""
from __future__ import annotations

import json
import logging
import queue
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable

from . import kpm
from . import northbound as nb
from .e2ap import Cause, RicRequestId, Verdict
from .kpm import ActionDefinition, EventTriggerDefinition
from .per import CodecError, from_hex, to_hex
from .registry import OPAQUE, Opaque, SmCodecKey, SmRegistry, default_registry

log = logging.getLogger(__name__)


class XappError(Exception):
    pass


class RicUnavailableError(XappError, ConnectionError):
    """Could not reach the RIC; safe to retry."""


class RegistrationRejected(XappError):
    pass


class SubscriptionRefused(XappError):
    def __init__(self, cause: Cause):
        super().__init__(f"subscription refused: {cause.label}")
        self.cause = cause


class ValidationError(XappError, ValueError):
    pass


@dataclass(frozen=True)
class FunctionInfo:
    ran_function_id: int
    key: SmCodecKey | None
    definition: Any
    summary: dict[int, list[str]] | None

    @property
    def opaque(self) -> bool:
        return isinstance(self.definition, Opaque)


@dataclass(frozen=True)
class DecodedIndication:
    node: str
    ran_function_id: int
    request_id: RicRequestId
    sn: int
    verdict: Verdict
    header: Any
    message: Any
    header_hex: str
    message_hex: str
    malformed: bool = False
    decode_failed: bool = False
    after_delete: bool = False

    @property
    def opaque(self) -> bool:
        return isinstance(self.message, Opaque)


@dataclass
class _Subscription:
    node: str
    ran_function_id: int
    action: Any
    period_ms: int
    codec: Any
    deleting: bool = False


class XappContext:
    def __init__(self, transport, xapp_id: str, registry: SmRegistry | None = None):
        self.xapp_id = xapp_id
        self.registry = registry if registry is not None else default_registry()
        self.transport = transport
        self.stats: Counter = Counter()
        self.reply_timeout = 10.0
        self._replies: queue.Queue = queue.Queue()
        self._inbox: queue.Queue = queue.Queue()
        self._req_lock = threading.RLock()
        self._cb_lock = threading.Lock()
        self._stop = threading.Event()
        self._subs: dict[RicRequestId, _Subscription] = {}
        self._retired: dict[RicRequestId, _Subscription] = {}
        self._pending_sub: _Subscription | None = None
        self._bindings: dict[str, dict[int, SmCodecKey]] = {}
        self._indication_cbs: list[Callable[[DecodedIndication], None]] = []
        self._closed_cbs: list[Callable[[RicRequestId, Cause], None]] = []
        self._running = False
        self._dispatching = False
        transport.bind(self)

    # -- plumbing -------------------------------------------------------------

    def _incoming(self, msg) -> None:
        """Called by the transport for every message from the RIC."""
        if isinstance(msg, nb.REPLY_TYPES):
            if isinstance(msg, nb.SubscribeResponse) and msg.admitted and self._pending_sub:
                # bind before any indication for this id can be dispatched
                self._subs[msg.request_id] = self._pending_sub
            self._replies.put(msg)
        else:
            self._inbox.put(msg)

    def _connection_lost(self) -> None:
        self._replies.put(None)
        self.stop()

    def _request(self, msg, expect: type):
        with self._req_lock:
            self.transport.send(msg)
            reply = self.transport.wait_reply(self, self.reply_timeout)
        if reply is None:
            raise XappError("connection to RIC lost")
        if not isinstance(reply, expect):
            raise XappError(f"expected {expect.__name__}, got {type(reply).__name__}")
        return reply

    def _register(self) -> None:
        reply = self._request(nb.XAppRegister(self.xapp_id), nb.XAppRegisterResponse)
        if not reply.accepted:
            raise RegistrationRejected(f"xApp id {self.xapp_id!r}: {reply.cause.label}")
        log.info("xApp %s registered", self.xapp_id)

    # -- discovery -------------------------------------------------------------

    def list_nodes(self) -> list[dict]:
        reply = self._request(nb.InventoryRequest(), nb.InventoryResponse)
        return json.loads(reply.records_json.decode("utf-8"))

    def available_functions(self, node: str) -> dict[int, FunctionInfo]:
        reply = self._request(nb.FunctionDefsRequest(node), nb.FunctionDefsResponse)
        bindings = {}
        out = {}
        for entry in reply.functions:
            key = SmCodecKey(entry.sm_name, entry.version) if entry.sm_name else None
            if key is not None:
                bindings[entry.ran_function_id] = key
            codec = self.registry.resolve_for_function(bindings, entry.ran_function_id)
            try:
                definition = codec.decode_function_definition(from_hex(entry.definition_hex))
            except CodecError as exc:
                log.warning("function %d of %s undecodable: %s", entry.ran_function_id, node, exc)
                definition = OPAQUE.decode_function_definition(from_hex(entry.definition_hex))
            summary = None if isinstance(definition, Opaque) else codec.summary(definition)
            out[entry.ran_function_id] = FunctionInfo(entry.ran_function_id, key, definition, summary)
            if summary is not None:
                log.info("Available functions: %s", summary)
        self._bindings[node] = bindings
        return out

    def _codec(self, node: str, ran_function_id: int):
        if node not in self._bindings:
            self.available_functions(node)
        return self.registry.resolve_for_function(self._bindings[node], ran_function_id)

    # -- subscription ------------------------------------------------------------

    def subscribe(self, node: str, ran_function_id: int, metrics, reporting_period_ms: int,
                  granularity_ms: int | None = None, style_id: int | None = None) -> RicRequestId:
        metrics = list(metrics)
        g = reporting_period_ms if granularity_ms is None else granularity_ms
        if not metrics:
            raise ValidationError("at least one metric is required")
        if not 1 <= reporting_period_ms <= 65536:
            raise ValidationError(f"reporting period {reporting_period_ms} outside [1, 65536]")
        if not 1 <= g <= 65536 or reporting_period_ms % g:
            raise ValidationError(f"granularity {g} must divide period {reporting_period_ms}")
        codec = self._codec(node, ran_function_id)
        if codec is OPAQUE:
            raise ValidationError(f"no codec bound to function {ran_function_id} of {node}")
        if style_id is None:
            style_id = self._pick_style(node, ran_function_id, metrics)
        action = ActionDefinition(style_id, metrics, g)
        log.info("Selected functions: %s", {style_id: metrics})
        log.info("Preparing subscription for gnb: %s", node)
        try:
            trigger = codec.encode_event_trigger(EventTriggerDefinition(reporting_period_ms))
            action_octets = codec.encode_action_definition(action)
        except CodecError as exc:
            raise ValidationError(str(exc)) from None
        log.info("event trigger encoded: %s", to_hex(trigger))
        with self._req_lock:
            self._pending_sub = _Subscription(node, ran_function_id, action,
                                              reporting_period_ms, codec)
            try:
                reply = self._request(nb.SubscribeRequest(
                    node, ran_function_id, to_hex(trigger), to_hex(action_octets)),
                    nb.SubscribeResponse)
            finally:
                self._pending_sub = None
        if not reply.admitted:
            raise SubscriptionRefused(reply.cause)
        log.info("subscription %s admitted", reply.request_id)
        return reply.request_id

    def _pick_style(self, node, ran_function_id, metrics) -> int:
        info = self.available_functions(node).get(ran_function_id)
        summary = info.summary if info else None
        if not summary:
            return kpm.PER_UE_STYLE
        wanted = set(metrics)
        for sid, names in summary.items():
            if wanted <= set(names):
                return sid
        return max(summary, key=lambda sid: len(wanted & set(summary[sid])))

    def unsubscribe(self, request_id: RicRequestId) -> None:
        sub = self._subs.get(request_id)
        if sub is not None:
            sub.deleting = True
        self._request(nb.SubscriptionDeleteRequest(request_id), nb.SubscriptionDeleteResponse)
        sub = self._subs.pop(request_id, None)
        if sub is not None:
            self._retired[request_id] = sub
        log.info("subscription %s deleted", request_id)

    @property
    def subscriptions(self) -> dict[RicRequestId, _Subscription]:
        return dict(self._subs)

    # -- control -------------------------------------------------------------------

    def send_control(self, node: str, ran_function_id: int, header: bytes,
                     message: bytes) -> bool:
        reply = self._request(nb.ControlForward(
            node, ran_function_id, to_hex(header), to_hex(message)), nb.ControlResult)
        return reply.acked

    # -- callbacks & dispatch ----------------------------------------------------

    def on_indication(self, callback: Callable[[DecodedIndication], None]) -> None:
        self._indication_cbs.append(callback)

    def on_subscription_closed(self, callback: Callable[[RicRequestId, Cause], None]) -> None:
        self._closed_cbs.append(callback)

    def decode_indication(self, fwd: nb.IndicationForward) -> DecodedIndication | None:
        sub = self._subs.get(fwd.request_id)
        after_delete = sub is None or sub.deleting
        if sub is None:
            sub = self._retired.get(fwd.request_id)
        if sub is None:
            return None
        common = dict(node=sub.node, ran_function_id=sub.ran_function_id,
                      request_id=fwd.request_id, sn=fwd.sn, verdict=fwd.verdict,
                      header_hex=fwd.header_hex, message_hex=fwd.message_hex,
                      after_delete=after_delete)
        try:
            hb, mb = from_hex(fwd.header_hex), from_hex(fwd.message_hex)
            header = sub.codec.decode_indication_header(hb)
            message = sub.codec.decode_indication_message(mb)
        except CodecError as exc:
            log.warning("indication sn=%d of %s failed to decode: %s", fwd.sn,
                        fwd.request_id, exc)
            self.stats["decode_failures"] += 1
            raw_h = Opaque(bytes.fromhex(fwd.header_hex)) if _is_hex(fwd.header_hex) else None
            raw_m = Opaque(bytes.fromhex(fwd.message_hex)) if _is_hex(fwd.message_hex) else None
            return DecodedIndication(header=raw_h, message=raw_m, malformed=True,
                                     decode_failed=True, **common)
        malformed = False
        if not isinstance(message, Opaque):
            width = len(sub.action.metrics)
            if any(len(r.values) != width for r in kpm.message_records(message)):
                log.warning("indication sn=%d of %s: record width != %d metrics",
                            fwd.sn, fwd.request_id, width)
                self.stats["width_mismatches"] += 1
                malformed = True
        return DecodedIndication(header=header, message=message, malformed=malformed, **common)

    def _handle_unsolicited(self, msg) -> None:
        if isinstance(msg, nb.IndicationForward):
            ind = self.decode_indication(msg)
            if ind is None:
                self.stats["unknown_subscription"] += 1
                return
            self.stats["indications"] += 1
            if ind.malformed:
                self.stats["malformed"] += 1
            for cb in self._indication_cbs:
                with self._cb_lock:
                    cb(ind)
        elif isinstance(msg, nb.SubscriptionClosed):
            sub = self._subs.pop(msg.request_id, None)
            if sub is not None:
                self._retired[msg.request_id] = sub
            log.info("subscription %s closed by RIC: %s", msg.request_id, msg.cause.label)
            for cb in self._closed_cbs:
                with self._cb_lock:
                    cb(msg.request_id, msg.cause)
        else:
            log.warning("unexpected %s from RIC", type(msg).__name__)

    def dispatch_pending(self) -> int:
        """Run callbacks for queued messages (used by single-threaded drivers)."""
        if not self._running or self._dispatching:
            return 0
        self._dispatching = True
        n = 0
        try:
            while not self._stop.is_set():
                try:
                    msg = self._inbox.get_nowait()
                except queue.Empty:
                    break
                if msg is None:
                    break
                self._handle_unsolicited(msg)
                n += 1
        finally:
            self._dispatching = False
        return n

    def dispatch_forever(self) -> None:
        """Blocking dispatch loop for threaded drivers; exits on :meth:`stop`."""
        while not self._stop.is_set():
            msg = self._inbox.get()
            if msg is None or self._stop.is_set():
                break
            self._handle_unsolicited(msg)

    # -- lifecycle -------------------------------------------------------------

    def logic(self) -> None:
        """Application behaviour; override in subclasses or pass one to run()."""
        raise NotImplementedError("override logic() or pass a callable to run()")

    def run(self, logic: Callable[[], Any] | None = None) -> None:
        logic = logic or self.logic
        self._running = True
        self.transport.start(self)
        try:
            logic()
        except BaseException:
            log.exception("xApp logic failed; deleting subscriptions")
            self._cleanup()
            self.stop()
            self.transport.finish(self)
            raise
        self.transport.serve(self)

    def _cleanup(self) -> None:
        for rid in list(self._subs):
            try:
                self.unsubscribe(rid)
            except Exception as exc:  # best effort
                log.warning("could not delete %s: %s", rid, exc)

    def stop(self) -> None:
        self._stop.set()
        self._inbox.put(None)

    @property
    def stopped(self) -> bool:
        return self._stop.is_set()

    def close(self) -> None:
        self.stop()
        self.transport.close()


def _is_hex(text: str) -> bool:
    try:
        bytes.fromhex(text)
    except ValueError:
        return False
    return True


def register(address, xapp_id: str, registry: SmRegistry | None = None,
             cls: type[XappContext] = XappContext, timeout: float = 5.0,
             **kwargs) -> XappContext:
    """Connect to a RIC over TCP and register ``xapp_id``."""
    from .net import TcpTransport

    transport = TcpTransport.connect(address, timeout=timeout)
    ctx = cls(transport, xapp_id, registry, **kwargs)
    try:
        ctx._register()
    except Exception:
        transport.close()
        raise
    return ctx

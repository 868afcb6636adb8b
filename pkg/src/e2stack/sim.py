"""Deterministic in-process driver: one RIC, any number of simulated nodes and
xApps, byte-level links and a virtual millisecond clock.

Every message crosses a link as an encoded frame.  Links are FIFO, so
per-connection order is preserved; when several links hold frames, the next
one to deliver is drawn from a seeded RNG, which makes cross-connection
interleaving reproducible per seed.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import random
from collections import deque
from typing import Callable

from .e2ap import FrameReader, frame
from .per import CodecError
from .ric import Ric
from .xapp import XappContext

log = logging.getLogger(__name__)

RIC = "ric"
INDICATION_CODE = 7


class Simulation:
    def __init__(self, ric: Ric | None = None, seed: int | None = 0):
        self.ric = ric if ric is not None else Ric()
        self.rng = random.Random(seed)
        self.now = 0
        self.nodes: dict[str, object] = {}  # conn -> E2NodeSim
        self.xapps: dict[str, XappContext] = {}
        self.wire: list[tuple[int, str, str, bytes]] = []
        self.frame_filter: Callable[[str, str, bytes], bytes] | None = None
        self._links: dict[tuple[str, str], deque] = {}
        self._readers: dict[tuple[str, str], FrameReader] = {}
        self._timers: list = []
        self._seq = itertools.count()
        self._xapp_seq = itertools.count(1)

    # -- links ------------------------------------------------------------------

    def _send(self, src: str, dst: str, msg) -> None:
        data = frame(msg)
        if self.frame_filter is not None:
            data = self.frame_filter(src, dst, data)
        self.wire.append((self.now, src, dst, data))
        self._links.setdefault((src, dst), deque()).append(data)

    def _deliver(self, src: str, dst: str, data: bytes) -> None:
        reader = self._readers.setdefault((src, dst), FrameReader())
        reader.feed(data)
        while True:
            try:
                msg = reader.next_message()
            except CodecError as exc:
                log.warning("dropping bad frame %s -> %s: %s", src, dst, exc)
                self.ric.counters["bad_frames"] += dst == RIC
                continue
            if msg is None:
                return
            if dst == RIC:
                for conn, out in self.ric.receive(src, msg):
                    self._send(RIC, conn, out)
            elif dst in self.nodes:
                for out in self.nodes[dst].receive(msg):
                    self._send(dst, RIC, out)
            elif dst in self.xapps:
                self.xapps[dst]._incoming(msg)

    def pump(self) -> bool:
        """Deliver queued frames until every link is empty."""
        progressed = False
        while True:
            ready = sorted(k for k, q in self._links.items() if q)
            if not ready:
                return progressed
            src, dst = ready[self.rng.randrange(len(ready))] if len(ready) > 1 else ready[0]
            self._deliver(src, dst, self._links[(src, dst)].popleft())
            progressed = True

    def settle(self) -> None:
        """Pump and run xApp callbacks until nothing moves."""
        while True:
            self.pump()
            if not sum(ctx.dispatch_pending() for ctx in list(self.xapps.values())):
                if not any(self._links.values()):
                    return

    # -- membership --------------------------------------------------------------

    def add_node(self, node, disconnect_at_end: bool = True) -> str:
        conn = f"node:{node.name}"
        self.nodes[conn] = node
        node.advance(self.now)
        self._send(conn, RIC, node.setup_request())
        if disconnect_at_end:
            self.schedule(node.end_ms, lambda: self.disconnect_node(node))
        self.settle()
        return conn

    def disconnect_node(self, node) -> None:
        conn = f"node:{node.name}"
        if self.nodes.pop(conn, None) is None:
            return
        self._drop_links(conn)
        for dst, msg in self.ric.connection_lost(conn):
            self._send(RIC, dst, msg)
        self.settle()

    def register_xapp(self, xapp_id: str, registry=None, cls=XappContext, **kwargs):
        conn = f"xapp:{next(self._xapp_seq)}"
        ctx = cls(LoopbackTransport(self, conn), xapp_id, registry, **kwargs)
        self.xapps[conn] = ctx
        try:
            ctx._register()
        except Exception:
            self.disconnect_xapp(conn)
            raise
        return ctx

    def disconnect_xapp(self, conn: str) -> None:
        if self.xapps.pop(conn, None) is None:
            return
        self._drop_links(conn)
        for dst, msg in self.ric.connection_lost(conn):
            self._send(RIC, dst, msg)
        self.settle()

    def _drop_links(self, conn: str) -> None:
        for key in [k for k in self._links if conn in k]:
            del self._links[key]
            self._readers.pop(key, None)

    # -- time ------------------------------------------------------------------

    def schedule(self, at_ms: int, fn: Callable[[], object]) -> None:
        heapq.heappush(self._timers, (at_ms, next(self._seq), fn))

    def next_time(self) -> int | None:
        times = [n.next_deadline() for n in self.nodes.values()]
        times = [t for t in times if t is not None]
        if self._timers:
            times.append(self._timers[0][0])
        return min(times, default=None)

    def step(self) -> bool:
        """Advance to the next event time.  Node reports fire before timers."""
        t = self.next_time()
        if t is None:
            return False
        self.now = max(self.now, t)
        for conn, node in sorted(self.nodes.items()):
            for msg in node.advance(self.now):
                self._send(conn, RIC, msg)
        self.settle()
        while self._timers and self._timers[0][0] <= self.now:
            _, _, fn = heapq.heappop(self._timers)
            fn()
            self.settle()
        return True

    def run(self, until: int | None = None, stop: Callable[[], bool] | None = None) -> None:
        while not (stop and stop()):
            t = self.next_time()
            if t is None or (until is not None and t > until):
                break
            self.step()
        if until is not None and not (stop and stop()):
            self.now = max(self.now, until)

    # -- inspection ------------------------------------------------------------

    def frames(self, src_prefix: str = "", type_code: int | None = None) -> list[bytes]:
        return [d for _, s, _, d in self.wire
                if s.startswith(src_prefix) and (type_code is None or d[4] == type_code)]

    @property
    def indication_frames(self) -> list[bytes]:
        """Node-to-RIC indication frames in emission order."""
        return self.frames("node:", INDICATION_CODE)


class LoopbackTransport:
    """xApp side of an in-process link; blocking calls pump the simulation."""

    def __init__(self, sim: Simulation, conn: str):
        self.sim = sim
        self.conn = conn

    def bind(self, ctx) -> None:
        self.ctx = ctx

    def send(self, msg) -> None:
        if self.conn not in self.sim.xapps:
            raise ConnectionError("xApp link closed")
        self.sim._send(self.conn, RIC, msg)

    def wait_reply(self, ctx, timeout):
        while True:
            if not ctx._replies.empty():
                return ctx._replies.get_nowait()
            if not self.sim.pump():
                # virtual time does not pass while waiting for a reply
                return None

    def start(self, ctx) -> None:
        pass

    def serve(self, ctx) -> None:
        self.sim.settle()
        self.sim.run(stop=lambda: ctx.stopped)

    def finish(self, ctx) -> None:
        pass

    def close(self) -> None:
        self.sim.disconnect_xapp(self.conn)

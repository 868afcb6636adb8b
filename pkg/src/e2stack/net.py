"""TCP driver: a threaded RIC server, the xApp client transport and a node
runner.  Frames are the same length-prefixed E2AP frames used in-process."""
from __future__ import annotations

import logging
import queue
import select
import socket
import socketserver
import threading
import time

from .e2ap import ErrorIndication, Cause, FrameError, FrameReader, ProtocolError, frame
from .per import CodecError
from .ric import Ric

log = logging.getLogger(__name__)

RECV_CHUNK = 65536


class ScenarioError(RuntimeError):
    pass


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit() or int(port) > 65535:
        raise ValueError(f"address must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


class _Peer:
    """RIC-side handle for one accepted connection."""

    def __init__(self, sock: socket.socket, name: str):
        self.sock = sock
        self.name = name
        self.closed = False

    def send(self, msg) -> None:
        if self.closed:
            return
        try:
            self.sock.sendall(frame(msg))
        except OSError as exc:
            log.info("send to %s failed: %s", self.name, exc)
            self.closed = True

    def __repr__(self):
        return f"<peer {self.name}>"


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        ric: Ric = self.server.ric
        peer = _Peer(self.request, "%s:%d" % self.client_address[:2])
        reader = FrameReader()
        try:
            while True:
                data = self.request.recv(RECV_CHUNK)
                if not data:
                    break
                reader.feed(data)
                while True:
                    try:
                        msg = reader.next_message()
                    except FrameError as exc:
                        # stream can no longer be resynchronised
                        log.warning("closing %s: %s", peer.name, exc)
                        return
                    except (ProtocolError, CodecError) as exc:
                        log.warning("bad frame from %s: %s", peer.name, exc)
                        peer.send(ErrorIndication(Cause.UNSPECIFIED))
                        continue
                    if msg is None:
                        break
                    with ric.lock:
                        for target, out in ric.receive(peer, msg):
                            target.send(out)
        except OSError:
            pass
        finally:
            peer.closed = True
            with ric.lock:
                for target, out in ric.connection_lost(peer):
                    target.send(out)


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class RicServer:
    def __init__(self, ric: Ric | None = None, host: str = "127.0.0.1", port: int = 0):
        self.ric = ric if ric is not None else Ric()
        self._server = _Server((host, port), _Handler)
        self._server.ric = self.ric
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> "RicServer":
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="ric-server", daemon=True)
        self._thread.start()
        return self

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()


def _connect(address, timeout: float) -> socket.socket:
    if isinstance(address, str):
        address = parse_address(address)
    return socket.create_connection(address, timeout=timeout)


class TcpTransport:
    """xApp side of a TCP link.  A reader thread routes replies and queues
    unsolicited messages; a dispatch thread runs callbacks serially."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.sock.settimeout(None)
        self._send_lock = threading.Lock()
        self._reader: threading.Thread | None = None
        self._dispatcher: threading.Thread | None = None
        self._closed = False

    @classmethod
    def connect(cls, address, timeout: float = 5.0) -> "TcpTransport":
        from .xapp import RicUnavailableError

        try:
            return cls(_connect(address, timeout))
        except OSError as exc:
            raise RicUnavailableError(f"cannot reach RIC at {address}: {exc}") from None

    def bind(self, ctx) -> None:
        self._reader = threading.Thread(target=self._read_loop, args=(ctx,),
                                        name=f"xapp-{ctx.xapp_id}-reader", daemon=True)
        self._reader.start()

    def _read_loop(self, ctx) -> None:
        reader = FrameReader()
        try:
            while True:
                data = self.sock.recv(RECV_CHUNK)
                if not data:
                    break
                reader.feed(data)
                while True:
                    try:
                        msg = reader.next_message()
                    except FrameError as exc:
                        log.warning("xApp %s: %s", ctx.xapp_id, exc)
                        return
                    except CodecError as exc:
                        log.warning("xApp %s: bad frame: %s", ctx.xapp_id, exc)
                        ctx.stats["bad_frames"] += 1
                        continue
                    if msg is None:
                        break
                    ctx._incoming(msg)
        except OSError:
            pass
        finally:
            ctx._connection_lost()

    def send(self, msg) -> None:
        with self._send_lock:
            self.sock.sendall(frame(msg))

    def wait_reply(self, ctx, timeout):
        try:
            return ctx._replies.get(timeout=timeout)
        except queue.Empty:
            return None

    def start(self, ctx) -> None:
        self._dispatcher = threading.Thread(target=ctx.dispatch_forever,
                                            name=f"xapp-{ctx.xapp_id}-dispatch", daemon=True)
        self._dispatcher.start()

    def serve(self, ctx) -> None:
        if self._dispatcher is not None:
            self._dispatcher.join()

    def finish(self, ctx) -> None:
        if self._dispatcher is not None and self._dispatcher is not threading.current_thread():
            self._dispatcher.join(timeout=1.0)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
        if self._reader is not None and self._reader is not threading.current_thread():
            self._reader.join(timeout=1.0)


def run_node_tcp(node, address, retries: int = 5, retry_delay: float = 0.1,
                 ready: threading.Event | None = None, idle_timeout: float = 10.0) -> None:
    """Connect ``node`` to a RIC and serve it on its own virtual clock.

    Once a subscription is active the node emits its reports back to back,
    without waiting for wall time, then disconnects at the end of its trace.
    """
    sock = None
    for attempt in range(retries + 1):
        try:
            sock = _connect(address, timeout=idle_timeout)
            sock.settimeout(None)
            break
        except OSError as exc:
            log.info("node %s: connect attempt %d failed: %s", node.name, attempt + 1, exc)
            if attempt < retries:
                time.sleep(retry_delay)
    if sock is None:
        raise ScenarioError(f"RIC at {address} unreachable after {retries + 1} attempts")
    reader = FrameReader()
    subscribed = False

    def send_all(msgs):
        for m in msgs:
            sock.sendall(frame(m))

    def handle(data):
        nonlocal subscribed
        reader.feed(data)
        while (msg := reader.next_message()) is not None:
            send_all(node.receive(msg))
            if node.setup_accepted is not None and ready is not None:
                ready.set()
            subscribed = subscribed or bool(node.subscriptions)

    try:
        send_all([node.setup_request()])
        while True:
            deadline = node.next_deadline()
            # virtual time: once subscribed, never wait on the wall clock
            wait = 0.0 if deadline is not None or subscribed else idle_timeout
            if select.select([sock], [], [], wait)[0]:
                data = sock.recv(RECV_CHUNK)
                if not data:
                    log.info("node %s: RIC closed the connection", node.name)
                    return
                handle(data)
                continue
            if deadline is not None:
                send_all(node.advance(deadline))
            elif node.setup_accepted is None:
                raise ScenarioError(f"node {node.name}: no setup response within {idle_timeout} s")
            elif subscribed:
                break
            else:
                raise ScenarioError(f"node {node.name}: no subscription within {idle_timeout} s")
        node.advance(node.end_ms)
    finally:
        if ready is not None:
            ready.set()
        sock.close()

"""Network runtime around ServerCore: a length-prefix framed TCP listener
and a WebSocket listener carrying the same JSON payloads, plus the poll and
checkpoint timers. One lock serializes all core access, which satisfies the
per-document serial-execution contract."""
from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from typing import Optional

from websockets.sync.server import serve as ws_serve

from .protocol import ProtocolError, StreamDecoder, decode_payload, encode, encode_payload
from .server import ServerConfig, ServerCore
from .storage import DocStore

log = logging.getLogger("snbviz.net")

_CLOSE = object()  # outbox sentinel: flush and close


def parse_address(addr: str, default_port: int = 0) -> tuple[str, int]:
    """'host:port' or bare 'host'; IPv4/hostname only."""
    if ":" in addr:
        host, _, port = addr.rpartition(":")
        return host, int(port)
    return addr, default_port


class _Handle:
    def __init__(self, client_id: int):
        self.client_id = client_id
        self.outbox: queue.Queue = queue.Queue()


class LiveServer:
    """Owns the core, the store, the listeners and the timer threads."""

    def __init__(self, config: ServerConfig, create_docs: tuple[str, ...] = (),
                 store: Optional[DocStore] = None):
        self.config = config
        self.store = store if store is not None else DocStore(config.data_dir)
        self.core = ServerCore(config, self.store)
        self.core.load(create_docs)
        self.lock = threading.RLock()
        self.handles: dict[int, _Handle] = {}
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._tcp_sock: Optional[socket.socket] = None
        self._ws_server = None
        self.tcp_port: Optional[int] = None
        self.ws_port: Optional[int] = None

    # -- core access (all under one lock) -----------------------------------

    def _process(self, client_id: int, msg) -> bool:
        """Handle one inbound message and fan out; returns True when the
        session must be closed."""
        with self.lock:
            outs = self.core.handle_message(client_id, msg)
            self._dispatch(outs)
            session = self.core.sessions.get(client_id)
            return session is None or session.kick

    def _dispatch(self, outs) -> None:
        for rcid, m in outs:
            h = self.handles.get(rcid)
            if h is not None:
                h.outbox.put(m)

    def _attach(self) -> _Handle:
        with self.lock:
            cid = self.core.connect()
            h = _Handle(cid)
            self.handles[cid] = h
        return h

    def _detach(self, h: _Handle) -> None:
        with self.lock:
            self.core.disconnect(h.client_id)
            self.handles.pop(h.client_id, None)
        h.outbox.put(_CLOSE)

    # -- TCP transport -------------------------------------------------------

    def _tcp_writer(self, conn: socket.socket, h: _Handle) -> None:
        try:
            while True:
                m = h.outbox.get()
                if m is _CLOSE:
                    break
                conn.sendall(encode(m))
        except OSError:
            pass
        finally:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()

    def _tcp_conn(self, conn: socket.socket, addr) -> None:
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        h = self._attach()
        log.info("tcp client %d connected from %s", h.client_id, addr)
        writer = threading.Thread(target=self._tcp_writer, args=(conn, h), daemon=True)
        writer.start()
        decoder = StreamDecoder()
        try:
            while not self._stop.is_set():
                try:
                    data = conn.recv(65536)
                except OSError:
                    break
                if not data:
                    break
                try:
                    msgs = decoder.feed(data)
                except ProtocolError as exc:
                    log.warning("client %d protocol error: %s", h.client_id, exc)
                    break
                if any(self._process(h.client_id, m) for m in msgs):
                    break
        finally:
            self._detach(h)
            log.info("tcp client %d disconnected", h.client_id)

    def _tcp_accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, addr = self._tcp_sock.accept()
            except OSError:
                return
            t = threading.Thread(target=self._tcp_conn, args=(conn, addr), daemon=True)
            t.start()

    # -- WebSocket transport ---------------------------------------------------

    def _ws_handler(self, ws) -> None:
        h = self._attach()
        log.info("ws client %d connected", h.client_id)

        def writer():
            try:
                while True:
                    m = h.outbox.get()
                    if m is _CLOSE:
                        break
                    ws.send(encode_payload(m))
            except Exception:
                pass

        wt = threading.Thread(target=writer, daemon=True)
        wt.start()
        try:
            for data in ws:
                try:
                    msg = decode_payload(data)
                except ProtocolError as exc:
                    log.warning("ws client %d protocol error: %s", h.client_id, exc)
                    break
                if self._process(h.client_id, msg):
                    break
        except Exception:
            pass
        finally:
            self._detach(h)
            try:
                ws.close()
            except Exception:
                pass
            log.info("ws client %d disconnected", h.client_id)

    # -- timers -----------------------------------------------------------------

    def _ticker(self) -> None:
        poll_s = self.config.poll_interval_ms / 1000.0
        next_checkpoint = time.monotonic() + self.config.checkpoint_interval_s
        while not self._stop.wait(poll_s):
            try:
                with self.lock:
                    outs = self.core.tick()
                    self._dispatch(outs)
                if time.monotonic() >= next_checkpoint:
                    with self.lock:
                        self.core.checkpoint_all()
                    next_checkpoint = time.monotonic() + self.config.checkpoint_interval_s
            except Exception:
                log.exception("tick failed")

    # -- lifecycle ----------------------------------------------------------------

    def start(self) -> None:
        host, port = parse_address(self.config.tcp_listen, 5150)
        self._tcp_sock = socket.create_server((host, port))
        self.tcp_port = self._tcp_sock.getsockname()[1]
        log.info("tcp listening on %s:%d", host, self.tcp_port)

        ws_host, ws_port = parse_address(self.config.ws_listen, 5151)
        ws_sock = socket.create_server((ws_host, ws_port))
        self.ws_port = ws_sock.getsockname()[1]
        self._ws_server = ws_serve(self._ws_handler, sock=ws_sock)
        log.info("ws listening on %s:%d", ws_host, self.ws_port)

        for target in (self._tcp_accept_loop, self._ws_server.serve_forever, self._ticker):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        if self._tcp_sock is not None:
            try:
                self._tcp_sock.close()
            except OSError:
                pass
        if self._ws_server is not None:
            self._ws_server.shutdown()
        with self.lock:
            self.core.checkpoint_all()
            self.store.close()

    def run_forever(self) -> None:
        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            log.info("shutting down")
        finally:
            self.stop()

"""Headless client: replica state machine, blocking TCP client with a
background reader, script runner, and file import.

The replica mutates only from server messages (SnapshotMsg, Applied,
DocReloaded); submitted ops are held as pending until their Applied or
Reject echo arrives.
"""
from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import model
from .ingest import infer_bonds, parse_snbg, parse_xyz
from .model import EditOp, MoleculeDoc, Snapshot, Vec3, apply_op, restore, snapshot
from .protocol import (
    Applied,
    DocReloaded,
    Error,
    Hello,
    Message,
    Open,
    OpSubmit,
    Ping,
    Pong,
    Presence,
    ProtocolError,
    Reject,
    SnapshotMsg,
    StreamDecoder,
    Welcome,
    encode,
)

log = logging.getLogger("snbviz.client")

CONNECT_FAILED = "connect_failed"
DISCONNECTED = "disconnected"
TIMEOUT = "timeout"


class ClientError(Exception):
    def __init__(self, code: str, detail: str = ""):
        self.code = code
        super().__init__(f"{code}: {detail}" if detail else code)


class DesyncError(Exception):
    """The Applied stream contradicted the local replica; protocol bug."""


@dataclass
class ClientDoc:
    """Local replica of one document plus this client's pending ops."""

    client_id: int
    local: MoleculeDoc
    pending: dict[tuple[int, int], EditOp] = field(default_factory=dict)
    applied_count: int = 0
    acked_count: int = 0
    rejected_count: int = 0
    reload_count: int = 0
    last_dropped: int = 0

    @property
    def version(self) -> int:
        return self.local.version

    def snapshot(self) -> Snapshot:
        return snapshot(self.local)


# Events returned by client_apply when a message resolves a pending op.
EV_APPLIED = "applied"
EV_REJECTED = "rejected"


def client_apply(cd: ClientDoc, msg: Message) -> Optional[tuple]:
    """Advance the replica from one server message.

    Returns ("applied", version, op_id) or ("rejected", reason, op_id) when
    the message resolves one of this client's own ops, else None.
    """
    if isinstance(msg, SnapshotMsg):
        cd.local = restore(msg.snapshot, cd.local.name)
        return None
    if isinstance(msg, Applied):
        if msg.version != cd.local.version + 1:
            raise DesyncError(
                f"applied version {msg.version} does not follow local {cd.local.version}")
        reason = apply_op(cd.local, msg.op)
        if reason is not None:
            raise DesyncError(f"broadcast op rejected locally ({reason})")
        cd.applied_count += 1
        if msg.origin_client == cd.client_id:
            cd.pending.pop(msg.op.op_id, None)
            cd.acked_count += 1
            return (EV_APPLIED, msg.version, msg.op.op_id)
        return None
    if isinstance(msg, Reject):
        if msg.op_id in cd.pending:
            cd.pending.pop(msg.op_id)
            cd.rejected_count += 1
            return (EV_REJECTED, msg.reason, msg.op_id)
        return None
    if isinstance(msg, DocReloaded):
        base = restore(msg.snapshot, cd.local.name)
        cd.local = base
        cd.reload_count += 1
        cd.last_dropped = msg.dropped_op_count
        return None
    return None


class Client:
    """Blocking request/response client; a background reader feeds an
    ordered inbox which every wait drains in arrival order."""

    def __init__(self, address: str, client_name: str = "snbviz", timeout: float = 10.0,
                 protocol_version: Optional[int] = None):
        host, _, port = address.rpartition(":")
        try:
            self.sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
        except OSError as exc:
            raise ClientError(CONNECT_FAILED, str(exc)) from None
        self._protocol_version = protocol_version
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock.settimeout(None)
        self.timeout = timeout
        self.inbox: queue.Queue = queue.Queue()
        self.docs: dict[str, ClientDoc] = {}
        self.presence: dict[tuple[str, int], Message] = {}
        self.client_id: int = 0
        self.doc_names: tuple[str, ...] = ()
        self._seq = 0
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._hello(client_name)

    # -- transport ---------------------------------------------------------

    def _read_loop(self) -> None:
        decoder = StreamDecoder()
        try:
            while True:
                data = self.sock.recv(65536)
                if not data:
                    break
                for msg in decoder.feed(data):
                    self.inbox.put(msg)
        except (OSError, ProtocolError) as exc:
            if not self._closed:
                log.debug("reader stopped: %s", exc)
        finally:
            self.inbox.put(None)  # EOF marker

    def _send(self, msg: Message) -> None:
        try:
            self.sock.sendall(encode(msg))
        except OSError as exc:
            raise ClientError(DISCONNECTED, str(exc)) from None

    def close(self) -> None:
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    # -- inbox processing -----------------------------------------------------

    def _route(self, msg: Message) -> Optional[tuple]:
        """Apply one inbound message to the right replica."""
        if isinstance(msg, (SnapshotMsg, Applied, Reject, DocReloaded)):
            cd = self.docs.get(msg.doc)
            if cd is not None:
                return client_apply(cd, msg)
            return None
        if isinstance(msg, Presence):
            self.presence[(msg.doc, msg.client_id)] = msg
        return None

    def _next_message(self, deadline: Optional[float]) -> Optional[Message]:
        block_for = None
        if deadline is not None:
            block_for = max(0.0, deadline - time.monotonic())
        try:
            msg = self.inbox.get(timeout=block_for)
        except queue.Empty:
            return None
        if msg is None:
            raise ClientError(DISCONNECTED, "server closed the connection")
        return msg

    def pump(self, duration: float = 0.0) -> None:
        """Process any queued broadcasts; with a duration, keep listening
        until it elapses."""
        deadline = time.monotonic() + duration
        while True:
            remaining = deadline - time.monotonic()
            if duration > 0 and remaining <= 0:
                return
            try:
                msg = self.inbox.get(timeout=remaining if duration > 0 else 0.0)
            except queue.Empty:
                return
            if msg is None:
                raise ClientError(DISCONNECTED, "server closed the connection")
            self._route(msg)

    def wait_until(self, pred, timeout: float = 5.0) -> bool:
        """Pump messages until pred() holds or the timeout elapses."""
        deadline = time.monotonic() + timeout
        while not pred():
            msg = self._next_message(deadline)
            if msg is None:
                return False
            self._route(msg)
        return True

    # -- handshake and requests --------------------------------------------------

    def _hello(self, client_name: str) -> None:
        if self._protocol_version is None:
            self._send(Hello(client_name))
        else:
            self._send(Hello(client_name, self._protocol_version))
        deadline = time.monotonic() + self.timeout
        while True:
            msg = self._next_message(deadline)
            if msg is None:
                raise ClientError(TIMEOUT, "no Welcome from server")
            if isinstance(msg, Welcome):
                self.client_id = msg.client_id
                self.doc_names = msg.doc_names
                return
            if isinstance(msg, Error):
                raise ClientError(msg.code, msg.detail)
            self._route(msg)

    def open(self, doc: str) -> ClientDoc:
        """Open a document and prime the local replica from the server
        snapshot."""
        self.docs.setdefault(doc, ClientDoc(self.client_id, MoleculeDoc(doc)))
        self._send(Open(doc))
        deadline = time.monotonic() + self.timeout
        while True:
            msg = self._next_message(deadline)
            if msg is None:
                raise ClientError(TIMEOUT, f"no snapshot for {doc!r}")
            if isinstance(msg, Error):
                self.docs.pop(doc, None)
                raise ClientError(msg.code, msg.detail)
            self._route(msg)
            if isinstance(msg, SnapshotMsg) and msg.doc == doc:
                return self.docs[doc]

    def next_op_id(self) -> tuple[int, int]:
        self._seq += 1
        return (self.client_id, self._seq)

    def submit(self, doc: str, op: EditOp) -> tuple[int, int]:
        """Send one op; returns the assigned op_id without waiting."""
        cd = self.docs[doc]
        op = op.with_op_id(self.next_op_id())
        cd.pending[op.op_id] = op
        self._send(OpSubmit(doc, op))
        return op.op_id

    def submit_and_await(self, doc: str, op: EditOp, timeout: Optional[float] = None) -> tuple:
        """Submit and block until the echo arrives.

        Returns ("applied", version) or ("rejected", reason); ("timeout",)
        signals transport trouble, not op failure.
        """
        timeout = self.timeout if timeout is None else timeout
        op_id = self.submit(doc, op)
        deadline = time.monotonic() + timeout
        while True:
            msg = self._next_message(deadline)
            if msg is None:
                return (TIMEOUT,)
            event = self._route(msg)
            if event and event[2] == op_id:
                if event[0] == EV_APPLIED:
                    return (EV_APPLIED, event[1])
                return (EV_REJECTED, event[1])

    def ping(self, nonce: int = 0, timeout: float = 5.0) -> bool:
        self._send(Ping(nonce))
        deadline = time.monotonic() + timeout
        while True:
            msg = self._next_message(deadline)
            if msg is None:
                return False
            if isinstance(msg, Pong) and msg.nonce == nonce:
                return True
            self._route(msg)

    def send_presence(self, doc: str, cursor) -> None:
        self._send(Presence(doc, self.client_id, cursor))


def connect_and_open(address: str, doc: str, client_name: str = "snbviz") -> tuple[Client, ClientDoc]:
    """Full handshake: Hello/Welcome, then Open/SnapshotMsg."""
    client = Client(address, client_name)
    try:
        cd = client.open(doc)
    except ClientError:
        client.close()
        raise
    return client, cd


# -- scripted edits -----------------------------------------------------------

@dataclass
class ScriptReport:
    ok: bool
    line: Optional[int] = None
    message: str = ""
    applied: int = 0
    rejected: int = 0
    atoms: int = 0
    bonds: int = 0


class _ScriptFailure(Exception):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


def _script_op(cmd: str, args: list[str], line: int) -> EditOp:
    try:
        if cmd == "add-atom":
            if len(args) not in (4, 5):
                raise ValueError("expected: add-atom <id> <x> <y> <z> [elem]")
            elem = args[4] if len(args) == 5 else "X"
            return model.add_atom(int(args[0]), Vec3(*(float(v) for v in args[1:4])), elem)
        if cmd == "add-bond":
            return model.add_bond(int(args[0]), int(args[1]))
        if cmd == "remove-bond":
            return model.remove_bond(int(args[0]), int(args[1]))
        if cmd == "remove-atom":
            return model.remove_atom(int(args[0]))
        if cmd == "set-element":
            return model.set_element(int(args[0]), args[1])
        if cmd == "move-atom":
            return model.move_atom(int(args[0]), Vec3(*(float(v) for v in args[1:4])))
    except (ValueError, IndexError) as exc:
        raise _ScriptFailure(line, f"bad arguments for {cmd}: {exc}") from None
    raise _ScriptFailure(line, f"unknown command {cmd!r}")


def run_script(path: str, address: str, client_name: str = "snbviz-script") -> ScriptReport:
    """Execute an edit script against a live server.

    One command per line: open, add-atom, add-bond, remove-bond,
    remove-atom, set-element, move-atom, expect-atoms, expect-bonds.
    Stops with a nonzero report at the first failing expectation.
    """
    report = ScriptReport(ok=True)
    client = Client(address, client_name)
    cd: Optional[ClientDoc] = None
    doc_name = ""
    try:
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            cmd, *args = text.split()
            if cmd == "open":
                if len(args) != 1:
                    raise _ScriptFailure(lineno, "expected: open <doc>")
                try:
                    cd = client.open(args[0])
                    doc_name = args[0]
                except ClientError as exc:
                    raise _ScriptFailure(lineno, str(exc)) from None
                continue
            if cd is None:
                raise _ScriptFailure(lineno, "no document open")
            if cmd == "expect-atoms" or cmd == "expect-bonds":
                if len(args) != 1:
                    raise _ScriptFailure(lineno, f"expected: {cmd} <n>")
                want = int(args[0])
                have = len(cd.local.atoms) if cmd == "expect-atoms" else len(cd.local.bonds)
                if have != want:
                    raise _ScriptFailure(lineno, f"{cmd} {want}, found {have}")
                continue
            op = _script_op(cmd, args, lineno)
            result = client.submit_and_await(doc_name, op)
            if result[0] == EV_APPLIED:
                report.applied += 1
            elif result[0] == EV_REJECTED:
                report.rejected += 1
                log.info("line %d: op rejected (%s)", lineno, result[1])
            else:
                raise _ScriptFailure(lineno, "timed out waiting for the server")
    except _ScriptFailure as exc:
        report.ok = False
        report.line = exc.line
        report.message = exc.message
    finally:
        if cd is not None:
            report.atoms = len(cd.local.atoms)
            report.bonds = len(cd.local.bonds)
        client.close()
    return report


# -- file import ------------------------------------------------------------------

@dataclass
class ImportReport:
    applied: int = 0
    rejected: int = 0
    atoms: int = 0
    bonds: int = 0
    id_offset: int = 0


def import_file(path: str, address: str, doc: str,
                bond_threshold: Optional[float] = None,
                client_name: str = "snbviz-import") -> ImportReport:
    """Upload a .snbg or .xyz file into a document as a sequence of ops.

    XYZ files carry no bonds, so bonds are inferred by distance. Source
    atom ids are remapped above the document's current maximum id.
    """
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".xyz"):
        snap = parse_xyz(text)
        threshold = 1.8 if bond_threshold is None else bond_threshold
        snap = Snapshot.build(0, snap.atoms, infer_bonds(snap.atoms, threshold))
    else:
        snap = parse_snbg(text)

    client, cd = connect_and_open(address, doc, client_name)
    report = ImportReport()
    try:
        base = max(cd.local.atoms, default=0)
        report.id_offset = base
        remap = {}
        for i, atom in enumerate(sorted(snap.atoms, key=lambda a: a.id), start=1):
            remap[atom.id] = base + i
            result = client.submit_and_await(doc, model.add_atom(base + i, atom.pos, atom.element))
            report.applied += result[0] == EV_APPLIED
            report.rejected += result[0] == EV_REJECTED
        for bd in snap.bonds:
            result = client.submit_and_await(doc, model.add_bond(remap[bd.a], remap[bd.b]))
            report.applied += result[0] == EV_APPLIED
            report.rejected += result[0] == EV_REJECTED
        report.atoms = len(cd.local.atoms)
        report.bonds = len(cd.local.bonds)
    finally:
        client.close()
    return report

"""Server core: named documents, serialized edit application with broadcast,
watched-file polling with overlay rebase, checkpointing and recovery.

handle_message and tick are plain state transitions returning the outbound
(recipient, message) list, so the whole server is testable single-threaded;
the network runtime in net.py serializes calls with one lock.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .ingest import (
    DEFAULT_BOND_THRESHOLD,
    FILE_MISSING,
    Snapshot,
    WatchState,
    infer_bonds,
    parse_snbg,
    parse_xyz,
    poll,
    rebase,
)
from .model import MoleculeDoc, apply_op, snapshot
from .pick import Ray
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
    PROTOCOL_VERSION,
    Reject,
    SnapshotMsg,
    Welcome,
)
from .storage import DocStore, make_entry, valid_doc_name

log = logging.getLogger("snbviz.server")

UNKNOWN_DOCUMENT = "unknown_document"
NOT_OPEN = "not_open"
BAD_PROTOCOL_VERSION = "bad_protocol_version"
HELLO_REQUIRED = "hello_required"
UNEXPECTED_MESSAGE = "unexpected_message"

PRESENCE_MIN_INTERVAL = 0.1  # seconds; presence fan-out is capped at 10 Hz

WATCH_SUFFIXES = (".snbg", ".xyz")

Outbound = list[tuple[int, Message]]


@dataclass
class ServerConfig:
    tcp_listen: str = "127.0.0.1:5150"
    ws_listen: str = "127.0.0.1:5151"
    data_dir: str = "snbviz-data"
    watch_dirs: list[str] = field(default_factory=list)
    poll_interval_ms: int = 500
    bond_threshold: float = DEFAULT_BOND_THRESHOLD
    checkpoint_interval_s: float = 30.0

    def validate(self) -> None:
        if self.poll_interval_ms <= 0:
            raise ValueError("poll_interval_ms must be > 0")
        if self.checkpoint_interval_s <= 0:
            raise ValueError("checkpoint_interval_s must be > 0")
        if self.bond_threshold <= 0:
            raise ValueError("bond_threshold must be > 0")


@dataclass
class SessionState:
    client_id: int
    client_name: str = ""
    hello_done: bool = False
    open_docs: set[str] = field(default_factory=set)
    # doc -> (time of last fan-out, latest cursor)
    last_presence: dict[str, tuple[float, Ray]] = field(default_factory=dict)
    kick: bool = False


@dataclass
class DocState:
    doc: MoleculeDoc
    watch: Optional[WatchState] = None
    loader: Optional[Callable[[str], Snapshot]] = None
    missing_reported: bool = False


class ServerCore:
    """All document and session state behind a message-in, messages-out API."""

    def __init__(self, config: ServerConfig, store: Optional[DocStore] = None):
        config.validate()
        self.config = config
        self.store = store
        self.docs: dict[str, DocState] = {}
        self.sessions: dict[int, SessionState] = {}
        self._next_client_id = 1

    # -- lifecycle ---------------------------------------------------------

    def load(self, create_docs: tuple[str, ...] = ()) -> None:
        """Recover persisted documents, bind watch directories, and create
        any requested empty documents."""
        if self.store is not None:
            for name, rec in self.store.recover().items():
                watch = None
                if rec.doc.watch_path is not None:
                    watch = WatchState(rec.doc.watch_path)
                self.docs[name] = DocState(rec.doc, watch, self._loader_for(rec.doc.watch_path))
                log.info("recovered %r at version %d (%d ops replayed)",
                         name, rec.doc.version, rec.replayed)
        for name in create_docs:
            self.create_doc(name)
        # Pick up watch files and load their content before serving.
        self.tick()

    def create_doc(self, name: str) -> MoleculeDoc:
        if not valid_doc_name(name):
            raise ValueError(f"invalid document name {name!r}")
        ds = self.docs.get(name)
        if ds is not None:
            return ds.doc
        doc = MoleculeDoc(name)
        self.docs[name] = DocState(doc)
        if self.store is not None:
            self.checkpoint_doc(name)
        log.info("created document %r", name)
        return doc

    def connect(self) -> int:
        cid = self._next_client_id
        self._next_client_id += 1
        self.sessions[cid] = SessionState(cid)
        return cid

    def disconnect(self, client_id: int) -> None:
        self.sessions.pop(client_id, None)

    # -- message handling ----------------------------------------------------

    def handle_message(self, client_id: int, msg: Message, now: Optional[float] = None) -> Outbound:
        session = self.sessions.get(client_id)
        if session is None:
            return []
        now = time.monotonic() if now is None else now

        if isinstance(msg, Hello):
            if msg.protocol_version != PROTOCOL_VERSION:
                session.kick = True
                return [(client_id, Error(BAD_PROTOCOL_VERSION,
                                          f"server speaks version {PROTOCOL_VERSION}"))]
            session.client_name = msg.client_name
            session.hello_done = True
            return [(client_id, Welcome(client_id, tuple(sorted(self.docs))))]

        if not session.hello_done:
            session.kick = True
            return [(client_id, Error(HELLO_REQUIRED, "say hello first"))]

        if isinstance(msg, Ping):
            return [(client_id, Pong(msg.nonce))]

        if isinstance(msg, Open):
            ds = self.docs.get(msg.doc)
            if ds is None:
                return [(client_id, Error(UNKNOWN_DOCUMENT, msg.doc))]
            session.open_docs.add(msg.doc)
            return [(client_id, SnapshotMsg(msg.doc, snapshot(ds.doc)))]

        if isinstance(msg, OpSubmit):
            return self._handle_op(session, msg)

        if isinstance(msg, Presence):
            return self._handle_presence(session, msg, now)

        session.kick = True
        return [(client_id, Error(UNEXPECTED_MESSAGE, type(msg).__name__))]

    def _handle_op(self, session: SessionState, msg: OpSubmit) -> Outbound:
        cid = session.client_id
        ds = self.docs.get(msg.doc)
        if ds is None:
            return [(cid, Reject(msg.doc, msg.op.op_id, UNKNOWN_DOCUMENT))]
        if msg.doc not in session.open_docs:
            return [(cid, Reject(msg.doc, msg.op.op_id, NOT_OPEN))]
        reason = apply_op(ds.doc, msg.op)
        if reason is not None:
            return [(cid, Reject(msg.doc, msg.op.op_id, reason))]
        if self.store is not None:
            self.store.append_entries(ds.doc.name, [make_entry(ds.doc, msg.op, cid)])
        applied = Applied(msg.doc, ds.doc.version, msg.op, cid)
        return [(sid, applied) for sid, s in self.sessions.items() if msg.doc in s.open_docs]

    def _handle_presence(self, session: SessionState, msg: Presence, now: float) -> Outbound:
        if msg.doc not in session.open_docs or msg.doc not in self.docs:
            return []
        last = session.last_presence.get(msg.doc)
        if last is not None and now - last[0] < PRESENCE_MIN_INTERVAL:
            # Rate-limited: remember the cursor (last write wins), no fan-out.
            session.last_presence[msg.doc] = (last[0], msg.cursor)
            return []
        session.last_presence[msg.doc] = (now, msg.cursor)
        out = Presence(msg.doc, session.client_id, msg.cursor)
        return [(sid, out) for sid, s in self.sessions.items()
                if sid != session.client_id and msg.doc in s.open_docs]

    # -- watched files -------------------------------------------------------

    def _loader_for(self, path: Optional[str]) -> Optional[Callable[[str], Snapshot]]:
        if path is None:
            return None
        if path.endswith(".xyz"):
            def load_xyz(text: str) -> Snapshot:
                snap = parse_xyz(text)
                return Snapshot.build(0, snap.atoms, infer_bonds(snap.atoms, self.config.bond_threshold))
            return load_xyz
        return parse_snbg

    def _scan_watch_dirs(self) -> None:
        for d in self.config.watch_dirs:
            try:
                entries = sorted(Path(d).iterdir())
            except OSError as exc:
                log.warning("cannot scan watch dir %s: %s", d, exc)
                continue
            for path in entries:
                if path.suffix not in WATCH_SUFFIXES or not path.is_file():
                    continue
                name = path.stem
                if not valid_doc_name(name):
                    continue
                ds = self.docs.get(name)
                if ds is not None:
                    if ds.watch is None and ds.doc.watch_path is None:
                        log.warning("watch file %s shadows edited document %r; ignoring file",
                                    path, name)
                    continue
                doc = MoleculeDoc(name, watch_path=str(path))
                self.docs[name] = DocState(doc, WatchState(str(path)),
                                           self._loader_for(str(path)))
                log.info("watching %s as document %r", path, name)

    def tick(self, now: Optional[float] = None) -> Outbound:
        """Poll every watched file; on change, rebase the edit overlay onto
        the new content and broadcast DocReloaded. Never raises."""
        out: Outbound = []
        self._scan_watch_dirs()
        for name, ds in list(self.docs.items()):
            if ds.watch is None:
                continue
            try:
                res = poll(ds.watch, ds.loader)
            except Exception:
                log.exception("poll failed for %r", name)
                continue
            if res.kind == "none":
                continue
            if res.kind == "error":
                if res.reason == FILE_MISSING:
                    if not ds.missing_reported:
                        log.warning("watched file for %r is missing; document frozen", name)
                        ds.missing_reported = True
                else:
                    log.warning("reload of %r failed: %s", name, res.reason)
                continue
            ds.missing_reported = False
            new_snap, report = rebase(res.snapshot, ds.doc.overlay)
            doc = ds.doc
            doc.atoms = {a.id: a for a in new_snap.atoms}
            doc.bonds = set(new_snap.bonds)
            doc.version += 1
            doc.overlay = list(report.kept)
            if report.dropped:
                for op, reason in report.dropped:
                    log.info("reload of %r dropped %s (%s)", name, op.kind, reason)
            msg = DocReloaded(name, snapshot(doc), len(report.dropped))
            out.extend((sid, msg) for sid, s in self.sessions.items() if name in s.open_docs)
            if self.store is not None:
                # Reload bumps the version without an op-log entry, so make
                # it durable right away to keep replay contiguous.
                self.checkpoint_doc(name)
        return out

    # -- persistence -----------------------------------------------------------

    def checkpoint_doc(self, name: str) -> list[str]:
        if self.store is None:
            return []
        ds = self.docs[name]
        return self.store.write_snapshot(name, snapshot(ds.doc),
                                         ds.doc.watch_path, ds.doc.overlay)

    def checkpoint_all(self) -> list[str]:
        files = []
        for name in self.docs:
            try:
                files.extend(self.checkpoint_doc(name))
            except OSError as exc:
                log.error("checkpoint of %r failed: %s", name, exc)
        return files

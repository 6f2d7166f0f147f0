"""Durable document state: canonical .snbg snapshot, JSON meta sidecar
(version, watch binding, edit overlay), and an append-only op log with one
JSON object per line. Snapshot and meta writes are atomic via
write-temp-then-rename; the op log is flushed on every append.
"""
from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ingest import ParseError, parse_snbg, serialize_snbg
from .model import EditOp, MoleculeDoc, Snapshot, apply_op, restore
from .protocol import ProtocolError, _op_from_json, _op_to_json

log = logging.getLogger("snbviz.storage")

DOC_NAME_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*\Z")


def valid_doc_name(name: str) -> bool:
    return bool(DOC_NAME_RE.match(name)) and ".." not in name


@dataclass(frozen=True)
class OpLogEntry:
    """One applied edit as persisted: the version it produced, the op, the
    originating client id and a wall-clock timestamp."""

    version: int
    op: EditOp
    origin: int
    ts: float

    def to_json(self) -> dict:
        return {"version": self.version, "op": _op_to_json(self.op),
                "origin": self.origin, "ts": self.ts}

    @staticmethod
    def from_json(obj: dict) -> "OpLogEntry":
        return OpLogEntry(
            version=int(obj["version"]),
            op=_op_from_json(obj["op"]),
            origin=int(obj["origin"]),
            ts=float(obj["ts"]),
        )


@dataclass
class RecoveredDoc:
    doc: MoleculeDoc
    warnings: list[str] = field(default_factory=list)
    replayed: int = 0


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


class DocStore:
    """Filesystem persistence rooted at one data directory."""

    def __init__(self, data_dir: str):
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._oplog_fh: dict[str, object] = {}

    def snbg_path(self, name: str) -> Path:
        return self.root / f"{name}.snbg"

    def meta_path(self, name: str) -> Path:
        return self.root / f"{name}.meta.json"

    def oplog_path(self, name: str) -> Path:
        return self.root / f"{name}.oplog"

    def close(self) -> None:
        for fh in self._oplog_fh.values():
            fh.close()
        self._oplog_fh.clear()

    def write_snapshot(self, name: str, snap: Snapshot,
                       watch_path: Optional[str] = None,
                       overlay: Optional[list[EditOp]] = None) -> list[str]:
        """Checkpoint the document snapshot; returns the files written."""
        if not valid_doc_name(name):
            raise ValueError(f"invalid document name {name!r}")
        snbg = self.snbg_path(name)
        meta = self.meta_path(name)
        _atomic_write(snbg, serialize_snbg(snap))
        meta_obj = {
            "version": snap.version,
            "watch_path": watch_path,
            "overlay": [_op_to_json(op) for op in (overlay or [])],
        }
        _atomic_write(meta, json.dumps(meta_obj, indent=1) + "\n")
        self.sync_oplog(name)
        return [str(snbg), str(meta)]

    def _oplog_handle(self, name: str):
        fh = self._oplog_fh.get(name)
        if fh is None:
            fh = open(self.oplog_path(name), "a", encoding="utf-8")
            self._oplog_fh[name] = fh
        return fh

    def append_entries(self, name: str, entries: list[OpLogEntry]) -> None:
        if not entries:
            return
        fh = self._oplog_handle(name)
        for entry in entries:
            fh.write(json.dumps(entry.to_json(), separators=(",", ":")) + "\n")
        fh.flush()

    def sync_oplog(self, name: str) -> None:
        fh = self._oplog_fh.get(name)
        if fh is not None:
            fh.flush()
            os.fsync(fh.fileno())

    def rewrite_oplog(self, name: str, entries: list[OpLogEntry]) -> None:
        """Replace the op log wholesale (used to drop a corrupt tail)."""
        fh = self._oplog_fh.pop(name, None)
        if fh is not None:
            fh.close()
        text = "".join(json.dumps(e.to_json(), separators=(",", ":")) + "\n" for e in entries)
        _atomic_write(self.oplog_path(name), text)

    def _read_oplog(self, name: str) -> tuple[list[OpLogEntry], Optional[str]]:
        path = self.oplog_path(name)
        if not path.exists():
            return [], None
        entries: list[OpLogEntry] = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    entries.append(OpLogEntry.from_json(json.loads(line)))
                except (json.JSONDecodeError, ProtocolError, KeyError, TypeError, ValueError) as exc:
                    return entries, f"op log line {lineno} unreadable ({exc}); replay stops there"
        return entries, None

    def recover_doc(self, name: str) -> Optional[RecoveredDoc]:
        """Load one document: snapshot, then replay op-log entries past the
        snapshot version, halting at the first inconsistent entry."""
        warnings = []
        try:
            base = parse_snbg(self.snbg_path(name).read_text(encoding="utf-8"))
        except (OSError, ParseError) as exc:
            log.warning("skipping document %r: %s", name, exc)
            return None

        version = 0
        watch_path = None
        overlay: list[EditOp] = []
        meta = self.meta_path(name)
        if meta.exists():
            try:
                obj = json.loads(meta.read_text(encoding="utf-8"))
                version = int(obj["version"])
                watch_path = obj.get("watch_path")
                overlay = [_op_from_json(o) for o in obj.get("overlay", [])]
            except (json.JSONDecodeError, ProtocolError, KeyError, TypeError, ValueError) as exc:
                warnings.append(f"meta sidecar unreadable ({exc}); assuming version 0")
                version, watch_path, overlay = 0, None, []
        else:
            warnings.append("meta sidecar missing; assuming version 0")

        doc = restore(Snapshot(version, base.atoms, base.bonds), name)
        doc.watch_path = watch_path
        doc.overlay = overlay

        entries, read_warning = self._read_oplog(name)
        replayed = 0
        halted = read_warning is not None
        kept: list[OpLogEntry] = []
        for entry in entries:
            if entry.version <= version:
                kept.append(entry)
                continue
            if entry.version != doc.version + 1:
                warnings.append(
                    f"op log jumps from version {doc.version} to {entry.version}; replay halted")
                halted = True
                break
            reason = apply_op(doc, entry.op)
            if reason is not None:
                warnings.append(
                    f"op log entry for version {entry.version} rejected ({reason}); replay halted")
                halted = True
                break
            # On a watched doc apply_op extends the overlay, which is right:
            # replayed entries are user edits made after the checkpoint.
            kept.append(entry)
            replayed += 1
        if read_warning:
            warnings.append(read_warning)
        if halted:
            # Drop the unreplayable tail so future appends stay consistent.
            self.rewrite_oplog(name, kept)
        for w in warnings:
            log.warning("recover %r: %s", name, w)
        return RecoveredDoc(doc, warnings, replayed)

    def recover(self) -> dict[str, RecoveredDoc]:
        """Load every document in the data directory."""
        docs = {}
        for path in sorted(self.root.glob("*.snbg")):
            name = path.stem
            if not valid_doc_name(name):
                log.warning("skipping %s: invalid document name", path)
                continue
            rec = self.recover_doc(name)
            if rec is not None:
                docs[name] = rec
        return docs


def make_entry(doc: MoleculeDoc, op: EditOp, origin: int) -> OpLogEntry:
    """Entry for an op that was just applied (doc.version already bumped)."""
    return OpLogEntry(doc.version, op, origin, time.time())

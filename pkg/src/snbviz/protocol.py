"""Wire protocol: message vocabulary, JSON payload codec, and binary
length-prefixed framing. Pure codec, no I/O.

Framing: 4-byte big-endian payload length, then the UTF-8 JSON text of one
message. Payloads above 16 MiB are a protocol error. The same JSON payloads
ride a WebSocket binary transport unframed (one payload per WS message).

See docs/PROTOCOL.md for the field-by-field wire reference.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from typing import Optional, Union

from .model import (
    ADD_ATOM,
    ADD_BOND,
    Atom,
    BAD_ELEMENT,
    Bond,
    DUPLICATE_ATOM,
    DUPLICATE_BOND,
    EditOp,
    ELEMENT_RE,
    MISSING_ATOM,
    MISSING_BOND,
    MOVE_ATOM,
    NONFINITE_POSITION,
    OP_KINDS,
    REMOVE_ATOM,
    REMOVE_BOND,
    SELF_BOND,
    SET_ELEMENT,
    Snapshot,
    Vec3,
)
from .pick import Ray

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 16 * 1024 * 1024

OVERSIZE_MESSAGE = "oversize_message"


class ProtocolError(ValueError):
    """Unrecoverable wire-level fault; the connection should be dropped."""

    def __init__(self, detail: str, code: str = "protocol_error"):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}")


@dataclass(frozen=True)
class Hello:
    client_name: str
    protocol_version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class Welcome:
    client_id: int
    doc_names: tuple[str, ...]


@dataclass(frozen=True)
class Open:
    doc: str


@dataclass(frozen=True)
class SnapshotMsg:
    doc: str
    snapshot: Snapshot


@dataclass(frozen=True)
class OpSubmit:
    doc: str
    op: EditOp


@dataclass(frozen=True)
class Applied:
    doc: str
    version: int
    op: EditOp
    origin_client: int


@dataclass(frozen=True)
class Reject:
    doc: str
    op_id: tuple[int, int]
    reason: str


@dataclass(frozen=True)
class Presence:
    doc: str
    client_id: int
    cursor: Ray


@dataclass(frozen=True)
class DocReloaded:
    doc: str
    snapshot: Snapshot
    dropped_op_count: int


@dataclass(frozen=True)
class Ping:
    nonce: int


@dataclass(frozen=True)
class Pong:
    nonce: int


@dataclass(frozen=True)
class Error:
    code: str
    detail: str = ""


Message = Union[
    Hello, Welcome, Open, SnapshotMsg, OpSubmit, Applied,
    Reject, Presence, DocReloaded, Ping, Pong, Error,
]

_TYPE_TAGS = {
    Hello: "hello",
    Welcome: "welcome",
    Open: "open",
    SnapshotMsg: "snapshot",
    OpSubmit: "op_submit",
    Applied: "applied",
    Reject: "reject",
    Presence: "presence",
    DocReloaded: "doc_reloaded",
    Ping: "ping",
    Pong: "pong",
    Error: "error",
}


def _vec_to_json(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def _op_to_json(op: EditOp) -> dict:
    out: dict = {"kind": op.kind, "op_id": [op.op_id[0], op.op_id[1]]}
    if op.kind == ADD_ATOM:
        out["id"] = op.atom_id
        out["pos"] = _vec_to_json(op.pos)
        out["element"] = op.element
    elif op.kind in (REMOVE_ATOM,):
        out["id"] = op.atom_id
    elif op.kind in (ADD_BOND, REMOVE_BOND):
        out["a"] = op.a
        out["b"] = op.b
    elif op.kind == SET_ELEMENT:
        out["id"] = op.atom_id
        out["element"] = op.element
    elif op.kind == MOVE_ATOM:
        out["id"] = op.atom_id
        out["pos"] = _vec_to_json(op.pos)
    return out


def _snapshot_to_json(s: Snapshot) -> dict:
    return {
        "version": s.version,
        "atoms": [{"id": a.id, "pos": _vec_to_json(a.pos), "element": a.element} for a in s.atoms],
        "bonds": [[b.a, b.b] for b in s.bonds],
    }


def _ray_to_json(r: Ray) -> dict:
    return {"origin": _vec_to_json(r.origin), "dir": _vec_to_json(r.dir)}


def to_jsonable(msg: Message) -> dict:
    """Message -> plain JSON object with a "type" discriminator."""
    tag = _TYPE_TAGS.get(type(msg))
    if tag is None:
        raise ProtocolError(f"unencodable message type {type(msg).__name__}")
    if isinstance(msg, Hello):
        return {"type": tag, "client_name": msg.client_name, "protocol_version": msg.protocol_version}
    if isinstance(msg, Welcome):
        return {"type": tag, "client_id": msg.client_id, "doc_names": list(msg.doc_names)}
    if isinstance(msg, Open):
        return {"type": tag, "doc": msg.doc}
    if isinstance(msg, SnapshotMsg):
        return {"type": tag, "doc": msg.doc, "snapshot": _snapshot_to_json(msg.snapshot)}
    if isinstance(msg, OpSubmit):
        return {"type": tag, "doc": msg.doc, "op": _op_to_json(msg.op)}
    if isinstance(msg, Applied):
        return {"type": tag, "doc": msg.doc, "version": msg.version,
                "op": _op_to_json(msg.op), "origin_client": msg.origin_client}
    if isinstance(msg, Reject):
        return {"type": tag, "doc": msg.doc, "op_id": list(msg.op_id), "reason": msg.reason}
    if isinstance(msg, Presence):
        return {"type": tag, "doc": msg.doc, "client_id": msg.client_id, "cursor": _ray_to_json(msg.cursor)}
    if isinstance(msg, DocReloaded):
        return {"type": tag, "doc": msg.doc, "snapshot": _snapshot_to_json(msg.snapshot),
                "dropped_op_count": msg.dropped_op_count}
    if isinstance(msg, Ping):
        return {"type": tag, "nonce": msg.nonce}
    if isinstance(msg, Pong):
        return {"type": tag, "nonce": msg.nonce}
    if isinstance(msg, Error):
        return {"type": tag, "code": msg.code, "detail": msg.detail}
    raise ProtocolError(f"unencodable message type {type(msg).__name__}")


class _Reader:
    """Strict field extraction; any shape violation is a protocol error."""

    def __init__(self, obj, ctx: str):
        if not isinstance(obj, dict):
            raise ProtocolError(f"{ctx}: expected object")
        self.obj = obj
        self.ctx = ctx
        self.seen = set()

    def _get(self, key):
        if key not in self.obj:
            raise ProtocolError(f"{self.ctx}: missing field {key!r}")
        self.seen.add(key)
        return self.obj[key]

    def str_(self, key) -> str:
        v = self._get(key)
        if not isinstance(v, str):
            raise ProtocolError(f"{self.ctx}: field {key!r} must be a string")
        return v

    def int_(self, key) -> int:
        v = self._get(key)
        if not isinstance(v, int) or isinstance(v, bool):
            raise ProtocolError(f"{self.ctx}: field {key!r} must be an integer")
        return v

    def num(self, key) -> float:
        v = self._get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ProtocolError(f"{self.ctx}: field {key!r} must be a number")
        return float(v)

    def list_(self, key) -> list:
        v = self._get(key)
        if not isinstance(v, list):
            raise ProtocolError(f"{self.ctx}: field {key!r} must be a list")
        return v

    def raw(self, key):
        return self._get(key)

    def done(self):
        extra = set(self.obj) - self.seen - {"type"}
        if extra:
            raise ProtocolError(f"{self.ctx}: unexpected fields {sorted(extra)}")


def _vec_from_json(v, ctx: str) -> Vec3:
    if not isinstance(v, list) or len(v) != 3:
        raise ProtocolError(f"{ctx}: expected [x, y, z]")
    out = []
    for c in v:
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise ProtocolError(f"{ctx}: coordinates must be finite numbers")
        out.append(float(c))
    return Vec3(*out)


def _op_id_from_json(v, ctx: str) -> tuple[int, int]:
    if (not isinstance(v, list) or len(v) != 2
            or any(isinstance(c, bool) or not isinstance(c, int) for c in v)):
        raise ProtocolError(f"{ctx}: op_id must be [client_id, seq]")
    return (v[0], v[1])


def _op_from_json(obj, ctx: str = "op") -> EditOp:
    r = _Reader(obj, ctx)
    kind = r.str_("kind")
    if kind not in OP_KINDS:
        raise ProtocolError(f"{ctx}: unknown op kind {kind!r}")
    op_id = _op_id_from_json(r.raw("op_id"), ctx)
    if kind == ADD_ATOM:
        op = EditOp(kind, op_id, atom_id=r.int_("id"),
                    pos=_vec_from_json(r.raw("pos"), ctx), element=r.str_("element"))
    elif kind == REMOVE_ATOM:
        op = EditOp(kind, op_id, atom_id=r.int_("id"))
    elif kind in (ADD_BOND, REMOVE_BOND):
        op = EditOp(kind, op_id, a=r.int_("a"), b=r.int_("b"))
    elif kind == SET_ELEMENT:
        op = EditOp(kind, op_id, atom_id=r.int_("id"), element=r.str_("element"))
    else:  # MOVE_ATOM
        op = EditOp(kind, op_id, atom_id=r.int_("id"), pos=_vec_from_json(r.raw("pos"), ctx))
    r.done()
    return op


def _snapshot_from_json(obj, ctx: str = "snapshot") -> Snapshot:
    r = _Reader(obj, ctx)
    version = r.int_("version")
    atoms = []
    for i, entry in enumerate(r.list_("atoms")):
        ar = _Reader(entry, f"{ctx}.atoms[{i}]")
        atoms.append(Atom(ar.int_("id"), _vec_from_json(ar.raw("pos"), ar.ctx), ar.str_("element")))
        ar.done()
    bonds = []
    for i, entry in enumerate(r.list_("bonds")):
        if (not isinstance(entry, list) or len(entry) != 2
                or any(isinstance(c, bool) or not isinstance(c, int) for c in entry)):
            raise ProtocolError(f"{ctx}.bonds[{i}]: expected [a, b]")
        bonds.append(Bond(entry[0], entry[1]))
    r.done()
    return Snapshot(version, tuple(atoms), tuple(bonds))


def _ray_from_json(obj, ctx: str = "cursor") -> Ray:
    r = _Reader(obj, ctx)
    ray = Ray(_vec_from_json(r.raw("origin"), ctx), _vec_from_json(r.raw("dir"), ctx))
    r.done()
    return ray


def from_jsonable(obj) -> Message:
    """Plain JSON object -> Message; raises ProtocolError on any mismatch."""
    if not isinstance(obj, dict):
        raise ProtocolError("payload is not a JSON object")
    tag = obj.get("type")
    if not isinstance(tag, str):
        raise ProtocolError("missing type tag")
    r = _Reader(obj, tag)
    if tag == "hello":
        msg = Hello(r.str_("client_name"), r.int_("protocol_version"))
    elif tag == "welcome":
        names = r.list_("doc_names")
        if not all(isinstance(n, str) for n in names):
            raise ProtocolError("welcome: doc_names must be strings")
        msg = Welcome(r.int_("client_id"), tuple(names))
    elif tag == "open":
        msg = Open(r.str_("doc"))
    elif tag == "snapshot":
        msg = SnapshotMsg(r.str_("doc"), _snapshot_from_json(r.raw("snapshot")))
    elif tag == "op_submit":
        msg = OpSubmit(r.str_("doc"), _op_from_json(r.raw("op")))
    elif tag == "applied":
        msg = Applied(r.str_("doc"), r.int_("version"), _op_from_json(r.raw("op")), r.int_("origin_client"))
    elif tag == "reject":
        msg = Reject(r.str_("doc"), _op_id_from_json(r.raw("op_id"), tag), r.str_("reason"))
    elif tag == "presence":
        msg = Presence(r.str_("doc"), r.int_("client_id"), _ray_from_json(r.raw("cursor")))
    elif tag == "doc_reloaded":
        msg = DocReloaded(r.str_("doc"), _snapshot_from_json(r.raw("snapshot")), r.int_("dropped_op_count"))
    elif tag == "ping":
        msg = Ping(r.int_("nonce"))
    elif tag == "pong":
        msg = Pong(r.int_("nonce"))
    elif tag == "error":
        msg = Error(r.str_("code"), r.str_("detail"))
    else:
        raise ProtocolError(f"unknown type tag {tag!r}")
    r.done()
    return msg


def encode_payload(msg: Message) -> bytes:
    """JSON payload bytes without framing (the WebSocket transport)."""
    try:
        text = json.dumps(to_jsonable(msg), separators=(",", ":"), allow_nan=False)
    except ValueError as exc:
        raise ProtocolError(f"unencodable number in message: {exc}") from None
    return text.encode("utf-8")


def decode_payload(data: bytes | str) -> Message:
    """One unframed JSON payload -> Message."""
    try:
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
        obj = json.loads(text)
    except UnicodeDecodeError:
        raise ProtocolError("payload is not valid UTF-8") from None
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc.msg}") from None
    return from_jsonable(obj)


def encode(msg: Message) -> bytes:
    """One complete frame: length prefix plus JSON payload."""
    payload = encode_payload(msg)
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"payload is {len(payload)} bytes", code=OVERSIZE_MESSAGE)
    return struct.pack("!I", len(payload)) + payload


def decode(buffer: bytes) -> Optional[tuple[Message, int]]:
    """Incremental decode of one frame from the head of ``buffer``.

    Returns (message, bytes consumed), or None when the buffer does not yet
    hold a complete frame; never consumes a partial frame. Raises
    ProtocolError on oversize length, bad UTF-8, malformed JSON, or an
    unknown type tag.
    """
    if len(buffer) < 4:
        return None
    (length,) = struct.unpack_from("!I", buffer)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame length {length} exceeds limit")
    if len(buffer) < 4 + length:
        return None
    msg = decode_payload(bytes(buffer[4:4 + length]))
    return msg, 4 + length


class StreamDecoder:
    """Buffered frame decoder for a byte stream; feed() returns the messages
    completed by the new bytes, in order."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message]:
        self._buf.extend(data)
        out = []
        while True:
            res = decode(self._buf)
            if res is None:
                return out
            msg, consumed = res
            del self._buf[:consumed]
            out.append(msg)

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)


def validate_op(op: EditOp, s: Snapshot) -> Optional[str]:
    """Pure precondition check of an op against a snapshot.

    Returns None when the op would apply, else exactly the reason apply_op
    would reject with. Implemented directly over the snapshot so it can
    cross-check the document path. Check order matches docs/PROTOCOL.md:
    payload validity first, then references.
    """
    ids = {a.id for a in s.atoms}
    pairs = {(b.a, b.b) if b.a < b.b else (b.b, b.a) for b in s.bonds}
    if op.kind == ADD_ATOM:
        if op.element is None or not ELEMENT_RE.match(op.element):
            return BAD_ELEMENT
        if op.pos is None or not op.pos.is_finite():
            return NONFINITE_POSITION
        if op.atom_id in ids:
            return DUPLICATE_ATOM
        return None
    if op.kind == REMOVE_ATOM:
        return None if op.atom_id in ids else MISSING_ATOM
    if op.kind == ADD_BOND:
        if op.a == op.b:
            return SELF_BOND
        if op.a not in ids or op.b not in ids:
            return MISSING_ATOM
        pair = (op.a, op.b) if op.a < op.b else (op.b, op.a)
        return DUPLICATE_BOND if pair in pairs else None
    if op.kind == REMOVE_BOND:
        if op.a not in ids or op.b not in ids:
            return MISSING_ATOM
        pair = (op.a, op.b) if op.a < op.b else (op.b, op.a)
        return None if pair in pairs else MISSING_BOND
    if op.kind == SET_ELEMENT:
        if op.element is None or not ELEMENT_RE.match(op.element):
            return BAD_ELEMENT
        return None if op.atom_id in ids else MISSING_ATOM
    if op.kind == MOVE_ATOM:
        if op.pos is None or not op.pos.is_finite():
            return NONFINITE_POSITION
        return None if op.atom_id in ids else MISSING_ATOM
    raise ValueError(f"unknown op kind: {op.kind!r}")

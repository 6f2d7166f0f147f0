"""Molecular graph documents and the edit-operation algebra.

A document is a map of atoms (id -> position/element) plus a set of bonds
(unordered id pairs, stored canonically with a < b). Every mutation goes
through :func:`apply_op`, so the server, clients, file rebase and crash
recovery all agree on exactly what each edit means and when it is rejected.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

ELEMENT_RE = re.compile(r"[A-Z][a-z]?\Z")

# Operation kinds.
ADD_ATOM = "add_atom"
REMOVE_ATOM = "remove_atom"
ADD_BOND = "add_bond"
REMOVE_BOND = "remove_bond"
SET_ELEMENT = "set_element"
MOVE_ATOM = "move_atom"

OP_KINDS = (ADD_ATOM, REMOVE_ATOM, ADD_BOND, REMOVE_BOND, SET_ELEMENT, MOVE_ATOM)

# Rejection reasons. These are wire-visible strings; see docs/PROTOCOL.md
# for the order in which they are checked per kind.
MISSING_ATOM = "missing_atom"
SELF_BOND = "self_bond"
DUPLICATE_BOND = "duplicate_bond"
MISSING_BOND = "missing_bond"
DUPLICATE_ATOM = "duplicate_atom"
BAD_ELEMENT = "bad_element"
NONFINITE_POSITION = "nonfinite_position"


@dataclass(frozen=True)
class Vec3:
    """Point or direction in 3-space; atom positions are in ångströms."""

    x: float
    y: float
    z: float

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)

    def add(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x + o.x, self.y + o.y, self.z + o.z)

    def sub(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x - o.x, self.y - o.y, self.z - o.z)

    def scale(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, o: "Vec3") -> float:
        return self.x * o.x + self.y * o.y + self.z * o.z

    def cross(self, o: "Vec3") -> "Vec3":
        return Vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero vector")
        return self.scale(1.0 / n)

    def dist(self, o: "Vec3") -> float:
        return self.sub(o).norm()


@dataclass(frozen=True)
class Atom:
    """One node of the molecular graph. Ids are assigned by the caller and
    are never recycled by well-behaved id allocators (the server hands out
    strictly increasing ids; clients use disjoint ranges)."""

    id: int
    pos: Vec3
    element: str = "X"


@dataclass(frozen=True, order=True)
class Bond:
    """Unordered atom pair, stored canonically with a < b."""

    a: int
    b: int

    @staticmethod
    def of(a: int, b: int) -> "Bond":
        return Bond(a, b) if a < b else Bond(b, a)


@dataclass(frozen=True)
class EditOp:
    """One atomic mutation; the unit of replication.

    ``op_id`` is (client id, client sequence number) and is unique per
    client. Payload fields are populated per kind; use the factory
    functions below rather than constructing directly.
    """

    kind: str
    op_id: tuple[int, int] = (0, 0)
    atom_id: Optional[int] = None
    a: Optional[int] = None
    b: Optional[int] = None
    pos: Optional[Vec3] = None
    element: Optional[str] = None

    def with_op_id(self, op_id: tuple[int, int]) -> "EditOp":
        return replace(self, op_id=op_id)


def add_atom(atom_id: int, pos: Vec3, element: str = "X", op_id=(0, 0)) -> EditOp:
    return EditOp(ADD_ATOM, op_id, atom_id=atom_id, pos=pos, element=element)


def remove_atom(atom_id: int, op_id=(0, 0)) -> EditOp:
    return EditOp(REMOVE_ATOM, op_id, atom_id=atom_id)


def add_bond(a: int, b: int, op_id=(0, 0)) -> EditOp:
    return EditOp(ADD_BOND, op_id, a=a, b=b)


def remove_bond(a: int, b: int, op_id=(0, 0)) -> EditOp:
    return EditOp(REMOVE_BOND, op_id, a=a, b=b)


def set_element(atom_id: int, element: str, op_id=(0, 0)) -> EditOp:
    return EditOp(SET_ELEMENT, op_id, atom_id=atom_id, element=element)


def move_atom(atom_id: int, pos: Vec3, op_id=(0, 0)) -> EditOp:
    return EditOp(MOVE_ATOM, op_id, atom_id=atom_id, pos=pos)


@dataclass
class MoleculeDoc:
    """Named, versioned document. ``watch_path`` is set when the document
    mirrors a monitored output file; ``overlay`` then records the user edits
    applied on top of the file content (replayed on reload)."""

    name: str
    version: int = 0
    atoms: dict[int, Atom] = field(default_factory=dict)
    bonds: set[Bond] = field(default_factory=set)
    watch_path: Optional[str] = None
    overlay: list[EditOp] = field(default_factory=list)


@dataclass(frozen=True)
class Snapshot:
    """Canonical serializable document state: atoms sorted by id, bonds
    sorted lexicographically."""

    version: int
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]

    @staticmethod
    def build(version: int, atoms: Iterable[Atom], bonds: Iterable[Bond]) -> "Snapshot":
        return Snapshot(
            version,
            tuple(sorted(atoms, key=lambda a: a.id)),
            tuple(sorted(bonds)),
        )


EMPTY_SNAPSHOT = Snapshot(0, (), ())


class InconsistentSnapshot(ValueError):
    """Snapshot fails self-consistency (e.g. a bond endpoint is missing)."""


def check_op(atoms: Mapping[int, Atom], bonds: set[Bond], op: EditOp) -> Optional[str]:
    """Precondition check for one op against document state.

    Returns a rejection reason, or None when the op would apply. Payload
    validity is checked before reference checks; see docs/PROTOCOL.md.
    """
    if op.kind == ADD_ATOM:
        if op.element is None or not ELEMENT_RE.match(op.element):
            return BAD_ELEMENT
        if op.pos is None or not op.pos.is_finite():
            return NONFINITE_POSITION
        if op.atom_id in atoms:
            return DUPLICATE_ATOM
        return None
    if op.kind == REMOVE_ATOM:
        if op.atom_id not in atoms:
            return MISSING_ATOM
        return None
    if op.kind == ADD_BOND:
        if op.a == op.b:
            return SELF_BOND
        if op.a not in atoms or op.b not in atoms:
            return MISSING_ATOM
        if Bond.of(op.a, op.b) in bonds:
            return DUPLICATE_BOND
        return None
    if op.kind == REMOVE_BOND:
        if op.a not in atoms or op.b not in atoms:
            return MISSING_ATOM
        if Bond.of(op.a, op.b) not in bonds:
            return MISSING_BOND
        return None
    if op.kind == SET_ELEMENT:
        if op.element is None or not ELEMENT_RE.match(op.element):
            return BAD_ELEMENT
        if op.atom_id not in atoms:
            return MISSING_ATOM
        return None
    if op.kind == MOVE_ATOM:
        if op.pos is None or not op.pos.is_finite():
            return NONFINITE_POSITION
        if op.atom_id not in atoms:
            return MISSING_ATOM
        return None
    raise ValueError(f"unknown op kind: {op.kind!r}")


def apply_op(doc: MoleculeDoc, op: EditOp) -> Optional[str]:
    """Apply one op to the document.

    Returns None on success (version bumped by 1, mutation applied) or the
    rejection reason, in which case the document is left untouched.
    RemoveAtom cascades: incident bonds are removed with the atom.
    """
    reason = check_op(doc.atoms, doc.bonds, op)
    if reason is not None:
        return reason
    if op.kind == ADD_ATOM:
        doc.atoms[op.atom_id] = Atom(op.atom_id, op.pos, op.element)
    elif op.kind == REMOVE_ATOM:
        doc.atoms.pop(op.atom_id)
        doc.bonds = {bd for bd in doc.bonds if op.atom_id not in (bd.a, bd.b)}
    elif op.kind == ADD_BOND:
        doc.bonds.add(Bond.of(op.a, op.b))
    elif op.kind == REMOVE_BOND:
        doc.bonds.discard(Bond.of(op.a, op.b))
    elif op.kind == SET_ELEMENT:
        doc.atoms[op.atom_id] = replace(doc.atoms[op.atom_id], element=op.element)
    elif op.kind == MOVE_ATOM:
        doc.atoms[op.atom_id] = replace(doc.atoms[op.atom_id], pos=op.pos)
    doc.version += 1
    if doc.watch_path is not None:
        doc.overlay.append(op)
    return None


def snapshot(doc: MoleculeDoc) -> Snapshot:
    """Canonical snapshot of the document state."""
    return Snapshot.build(doc.version, doc.atoms.values(), doc.bonds)


def verify_snapshot(s: Snapshot) -> None:
    """Raise InconsistentSnapshot unless the snapshot is self-consistent."""
    ids = set()
    for atom in s.atoms:
        if atom.id in ids:
            raise InconsistentSnapshot(f"duplicate atom id {atom.id}")
        if not ELEMENT_RE.match(atom.element):
            raise InconsistentSnapshot(f"bad element {atom.element!r} on atom {atom.id}")
        if not atom.pos.is_finite():
            raise InconsistentSnapshot(f"non-finite position on atom {atom.id}")
        ids.add(atom.id)
    seen = set()
    for bd in s.bonds:
        if bd.a == bd.b:
            raise InconsistentSnapshot(f"self bond on atom {bd.a}")
        if bd.a not in ids or bd.b not in ids:
            raise InconsistentSnapshot(f"bond ({bd.a},{bd.b}) endpoint missing")
        key = Bond.of(bd.a, bd.b)
        if key in seen:
            raise InconsistentSnapshot(f"duplicate bond ({bd.a},{bd.b})")
        seen.add(key)


def restore(s: Snapshot, name: str = "restored") -> MoleculeDoc:
    """Rebuild an editable document from a snapshot (source: edited)."""
    verify_snapshot(s)
    return MoleculeDoc(
        name=name,
        version=s.version,
        atoms={a.id: a for a in s.atoms},
        bonds={Bond.of(bd.a, bd.b) for bd in s.bonds},
    )

"""Structure-output file handling: parse/serialize, bond inference, and
poll-based live monitoring with user-edit rebase.

Native interchange format (``.snbg``), whitespace-delimited UTF-8:

    # comment lines and blank lines are ignored
    ATOMS <n>
    <id> <x> <y> <z> [element]      n rows; element defaults to "X"
    BONDS <m>
    <a> <b>                         m rows

On write: LF line endings, positions fixed at 4 decimal places
(round-half-to-even), atoms ordered by id, bonds lexicographic.
"""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Callable, Iterable, Optional

from .model import (
    Atom,
    Bond,
    EditOp,
    ELEMENT_RE,
    Snapshot,
    Vec3,
    apply_op,
    restore,
    snapshot,
)

SYNTAX_ERROR = "syntax_error"
UNKNOWN_ATOM_IN_BOND = "unknown_atom_in_bond"
DUPLICATE_ATOM_ID = "duplicate_atom_id"
COUNT_MISMATCH = "count_mismatch"

FILE_MISSING = "file_missing"
PARSE_FAILED = "parse_failed"

DEFAULT_BOND_THRESHOLD = 1.8  # Å, typical covalent upper bound; config overrides


class ParseError(ValueError):
    """Structured parse failure with an error code and 1-based line number."""

    def __init__(self, code: str, line: Optional[int] = None, detail: str = ""):
        self.code = code
        self.line = line
        self.detail = detail
        msg = code
        if line is not None:
            msg += f" (line {line})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


def _significant_lines(text: str) -> list[tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        out.append((lineno, stripped))
    return out


def _parse_count(fields: list[str], keyword: str, lineno: int) -> int:
    if len(fields) != 2 or fields[0] != keyword:
        raise ParseError(SYNTAX_ERROR, lineno, f"expected '{keyword} <count>'")
    try:
        n = int(fields[1])
    except ValueError:
        raise ParseError(SYNTAX_ERROR, lineno, f"bad {keyword} count {fields[1]!r}") from None
    if n < 0:
        raise ParseError(SYNTAX_ERROR, lineno, f"negative {keyword} count")
    return n


def _parse_coord(token: str, lineno: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise ParseError(SYNTAX_ERROR, lineno, f"bad coordinate {token!r}") from None
    if not math.isfinite(v):
        raise ParseError(SYNTAX_ERROR, lineno, f"non-finite coordinate {token!r}")
    return v


def parse_snbg(text: str) -> Snapshot:
    """Parse ``.snbg`` text into a snapshot (version 0)."""
    lines = _significant_lines(text)
    pos = 0

    def next_line(expect: str) -> tuple[int, str]:
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(COUNT_MISMATCH, None, f"unexpected end of file, {expect}")
        item = lines[pos]
        pos += 1
        return item

    lineno, header = next_line("expected ATOMS header")
    n_atoms = _parse_count(header.split(), "ATOMS", lineno)

    atoms: dict[int, Atom] = {}
    for _ in range(n_atoms):
        lineno, row = next_line("expected atom row")
        fields = row.split()
        if fields and fields[0] == "BONDS":
            raise ParseError(COUNT_MISMATCH, lineno, "fewer atom rows than declared")
        if len(fields) not in (4, 5):
            raise ParseError(SYNTAX_ERROR, lineno, "expected 'id x y z [element]'")
        try:
            atom_id = int(fields[0])
        except ValueError:
            raise ParseError(SYNTAX_ERROR, lineno, f"bad atom id {fields[0]!r}") from None
        if atom_id in atoms:
            raise ParseError(DUPLICATE_ATOM_ID, lineno, f"atom id {atom_id}")
        x, y, z = (_parse_coord(tok, lineno) for tok in fields[1:4])
        element = fields[4] if len(fields) == 5 else "X"
        if not ELEMENT_RE.match(element):
            raise ParseError(SYNTAX_ERROR, lineno, f"bad element {element!r}")
        atoms[atom_id] = Atom(atom_id, Vec3(x, y, z), element)

    lineno, header = next_line("expected BONDS header")
    fields = header.split()
    if fields[0] != "BONDS":
        raise ParseError(COUNT_MISMATCH, lineno, "more atom rows than declared")
    n_bonds = _parse_count(fields, "BONDS", lineno)

    bonds: set[Bond] = set()
    for _ in range(n_bonds):
        lineno, row = next_line("expected bond row")
        fields = row.split()
        if len(fields) != 2:
            raise ParseError(SYNTAX_ERROR, lineno, "expected 'id1 id2'")
        try:
            a, b = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(SYNTAX_ERROR, lineno, "bad bond atom id") from None
        if a == b:
            raise ParseError(SYNTAX_ERROR, lineno, f"self bond on atom {a}")
        if a not in atoms or b not in atoms:
            raise ParseError(UNKNOWN_ATOM_IN_BOND, lineno, f"bond ({a},{b})")
        bd = Bond.of(a, b)
        if bd in bonds:
            raise ParseError(SYNTAX_ERROR, lineno, f"duplicate bond ({a},{b})")
        bonds.add(bd)

    if pos < len(lines):
        raise ParseError(COUNT_MISMATCH, lines[pos][0], "more bond rows than declared")
    return Snapshot.build(0, atoms.values(), bonds)


_Q4 = Decimal("0.0001")


def _fmt4(x: float) -> str:
    """Fixed 4 decimal places, round-half-to-even on the decimal value
    (so 1.00005 renders as 1.0000, not as the binary-double artifact)."""
    return str(Decimal(repr(x)).quantize(_Q4, rounding=ROUND_HALF_EVEN))


def serialize_snbg(s: Snapshot) -> str:
    """Canonical text form; parse_snbg(serialize_snbg(s)) reproduces s."""
    atoms = sorted(s.atoms, key=lambda a: a.id)
    bonds = sorted(Bond.of(b.a, b.b) for b in s.bonds)
    out = [f"ATOMS {len(atoms)}"]
    for a in atoms:
        out.append(f"{a.id} {_fmt4(a.pos.x)} {_fmt4(a.pos.y)} {_fmt4(a.pos.z)} {a.element}")
    out.append(f"BONDS {len(bonds)}")
    for bd in bonds:
        out.append(f"{bd.a} {bd.b}")
    return "\n".join(out) + "\n"


def parse_xyz(text: str) -> Snapshot:
    """Parse standard XYZ text: count line, comment line, then
    ``element x y z`` rows. Atom ids are assigned 1..n in row order;
    the format carries no bonds."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError(SYNTAX_ERROR, 1, "expected atom count")
    fields = lines[0].split()
    if len(fields) != 1:
        raise ParseError(SYNTAX_ERROR, 1, "expected a single atom count")
    try:
        n = int(fields[0])
    except ValueError:
        raise ParseError(SYNTAX_ERROR, 1, f"bad atom count {fields[0]!r}") from None
    if n < 0:
        raise ParseError(SYNTAX_ERROR, 1, "negative atom count")

    atoms = []
    row_lines = lines[2:]
    for i in range(n):
        if i >= len(row_lines):
            raise ParseError(COUNT_MISMATCH, None, f"{n} atoms declared, {i} rows found")
        lineno = i + 3
        fields = row_lines[i].split()
        if len(fields) != 4:
            raise ParseError(SYNTAX_ERROR, lineno, "expected 'element x y z'")
        element = fields[0][:1].upper() + fields[0][1:].lower()
        if not ELEMENT_RE.match(element):
            raise ParseError(SYNTAX_ERROR, lineno, f"bad element {fields[0]!r}")
        x, y, z = (_parse_coord(tok, lineno) for tok in fields[1:4])
        atoms.append(Atom(i + 1, Vec3(x, y, z), element))

    for j, extra in enumerate(row_lines[n:], start=n + 3):
        if extra.strip():
            raise ParseError(COUNT_MISMATCH, j, "more atom rows than declared")
    return Snapshot.build(0, atoms, ())


def infer_bonds(atoms: Iterable[Atom], threshold: float = DEFAULT_BOND_THRESHOLD) -> list[Bond]:
    """All unordered atom pairs within ``threshold`` Å (inclusive), canonical
    ordering. Exhaustive pair scan; output independent of input order."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    ordered = sorted(atoms, key=lambda a: a.id)
    bonds = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a.pos.dist(b.pos) <= threshold:
                bonds.append(Bond.of(a.id, b.id))
    bonds.sort()
    return bonds


def content_hash(data: bytes) -> int:
    """64-bit content hash used by the file watcher."""
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


@dataclass
class WatchState:
    """Polling state for one monitored file. The content hash is recomputed
    only when mtime or size changed since the last poll."""

    path: str
    last_mtime_ns: Optional[int] = None
    last_size: Optional[int] = None
    last_hash: Optional[int] = None


@dataclass(frozen=True)
class PollResult:
    kind: str  # "none" | "reloaded" | "error"
    snapshot: Optional[Snapshot] = None
    reason: Optional[str] = None

    @staticmethod
    def none() -> "PollResult":
        return PollResult("none")

    @staticmethod
    def reloaded(snap: Snapshot) -> "PollResult":
        return PollResult("reloaded", snapshot=snap)

    @staticmethod
    def error(reason: str) -> "PollResult":
        return PollResult("error", reason=reason)


Loader = Callable[[str], Snapshot]


def poll(state: WatchState, loader: Optional[Loader] = None) -> PollResult:
    """Check the watched file for changes.

    Fast path compares mtime/size; on change the 64-bit content hash decides
    whether a reload is real. Parse failures leave the state untouched so the
    next poll retries; both failure kinds are non-fatal signals.
    """
    loader = loader or parse_snbg
    try:
        st = os.stat(state.path)
    except (FileNotFoundError, NotADirectoryError):
        return PollResult.error(FILE_MISSING)
    if st.st_mtime_ns == state.last_mtime_ns and st.st_size == state.last_size:
        return PollResult.none()
    try:
        with open(state.path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        return PollResult.error(FILE_MISSING)
    except OSError as exc:
        return PollResult.error(f"{PARSE_FAILED}: {exc}")
    digest = content_hash(data)
    if digest == state.last_hash:
        # Same bytes rewritten; remember the new stat so the fast path holds.
        state.last_mtime_ns, state.last_size = st.st_mtime_ns, st.st_size
        return PollResult.none()
    try:
        snap = loader(data.decode("utf-8"))
    except (ParseError, UnicodeDecodeError, ValueError) as exc:
        return PollResult.error(f"{PARSE_FAILED}: {exc}")
    state.last_mtime_ns, state.last_size, state.last_hash = st.st_mtime_ns, st.st_size, digest
    return PollResult.reloaded(snap)


@dataclass
class RebaseReport:
    """Outcome of replaying a user-edit overlay onto a reloaded base."""

    kept: list[EditOp]
    dropped: list[tuple[EditOp, str]]


def rebase(new_base: Snapshot, overlay: list[EditOp]) -> tuple[Snapshot, RebaseReport]:
    """Replay overlay ops in order onto the new base; ops that no longer
    apply are dropped with their rejection reason, never raised."""
    doc = restore(new_base, "rebase")
    kept: list[EditOp] = []
    dropped: list[tuple[EditOp, str]] = []
    for op in overlay:
        reason = apply_op(doc, op)
        if reason is None:
            kept.append(op)
        else:
            dropped.append((op, reason))
    return snapshot(doc), RebaseReport(kept, dropped)

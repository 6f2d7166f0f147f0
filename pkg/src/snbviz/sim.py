"""Deterministic multi-client simulation on a virtual clock.

The real ServerCore and the real client replica state machine run
in-process, joined by simulated links that deliver in order per link
(TCP-like) with seeded random latency, so runs are reproducible bit for
bit and the cross-link race space is fully exercised.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass

from . import model
from .client import ClientDoc, client_apply
from .ingest import serialize_snbg
from .model import MoleculeDoc, Snapshot, Vec3, apply_op, restore, snapshot
from .protocol import Applied, Hello, Message, Open, OpSubmit, SnapshotMsg, Welcome
from .server import ServerConfig, ServerCore

DOC = "sim"
ELEMENTS = ("C", "N", "O", "S", "P", "X")


@dataclass(frozen=True)
class LatencyModel:
    """Uniform per-message delay in milliseconds."""

    min_ms: float = 0.0
    max_ms: float = 0.0

    def __post_init__(self):
        if self.min_ms < 0 or self.max_ms < self.min_ms:
            raise ValueError("need 0 <= min_ms <= max_ms")

    def sample(self, rng: random.Random) -> float:
        return rng.uniform(self.min_ms, self.max_ms)


@dataclass
class ConvergenceReport:
    seed: int
    n_clients: int
    n_ops: int
    server_hash: str
    client_hashes: dict[int, str]
    ops_applied: int
    ops_rejected: int
    acks_per_client: dict[int, int]
    replay_matches: bool
    equal: bool

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "clients": self.n_clients,
            "ops": self.n_ops,
            "equal": self.equal,
            "replay_matches": self.replay_matches,
            "server_hash": self.server_hash,
            "client_hashes": {str(k): v for k, v in self.client_hashes.items()},
            "ops_applied": self.ops_applied,
            "ops_rejected": self.ops_rejected,
            "acks_per_client": {str(k): v for k, v in self.acks_per_client.items()},
        }


def state_hash(snap: Snapshot) -> str:
    """Canonical content hash including the version."""
    text = f"version {snap.version}\n" + serialize_snbg(snap)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _seed_doc(doc: MoleculeDoc, rng: random.Random) -> None:
    n = rng.randint(6, 12)
    for i in range(1, n + 1):
        doc.atoms[i] = model.Atom(
            i,
            Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)),
            rng.choice(ELEMENTS),
        )
    ids = sorted(doc.atoms)
    for _ in range(rng.randint(3, 6)):
        a, b = rng.sample(ids, 2)
        doc.bonds.add(model.Bond.of(a, b))


class _SimClient:
    def __init__(self, index: int, ops_budget: int):
        self.index = index
        self.client_id = 0
        self.cd: ClientDoc | None = None
        self.ops_left = ops_budget
        self.next_seq = 0
        self.acks = 0
        self.rejects = 0

    def make_op(self, rng: random.Random) -> model.EditOp:
        """Random plausibly-valid op against the (possibly stale) local view;
        a small slice is deliberately invalid to exercise rejections."""
        self.next_seq += 1
        op_id = (self.client_id, self.next_seq)
        local = self.cd.local
        atom_ids = sorted(local.atoms)
        bonds = sorted(local.bonds)
        roll = rng.random()
        if roll < 0.02:
            # junk referencing an id that never existed
            return model.remove_atom(10 ** 9 + rng.randint(0, 99), op_id)
        if roll < 0.04 and atom_ids:
            a = rng.choice(atom_ids)
            return model.add_bond(a, a, op_id)  # self bond, always rejected
        if roll < 0.34 or not atom_ids:
            fresh = self.client_id * 1_000_000 + self.next_seq
            pos = Vec3(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8))
            return model.add_atom(fresh, pos, rng.choice(ELEMENTS), op_id)
        if roll < 0.54 and len(atom_ids) >= 2:
            a, b = rng.sample(atom_ids, 2)
            return model.add_bond(a, b, op_id)
        if roll < 0.64 and bonds:
            bd = rng.choice(bonds)
            return model.remove_bond(bd.a, bd.b, op_id)
        if roll < 0.74:
            return model.remove_atom(rng.choice(atom_ids), op_id)
        if roll < 0.89:
            return model.set_element(rng.choice(atom_ids), rng.choice(ELEMENTS), op_id)
        pos = Vec3(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8))
        return model.move_atom(rng.choice(atom_ids), pos, op_id)


def simulate(n_clients: int, n_ops: int,
             latency: LatencyModel = LatencyModel(),
             seed: int = 0) -> ConvergenceReport:
    """Run n_ops total edits (round-robin across clients) through an
    in-process server over latency-injected in-order links, drain, and
    report convergence plus the applied-log replay check."""
    if n_clients < 1:
        raise ValueError("n_clients must be >= 1")
    if n_ops < 0:
        raise ValueError("n_ops must be >= 0")
    rng = random.Random(seed)
    core = ServerCore(ServerConfig(), store=None)
    doc = core.create_doc(DOC)
    _seed_doc(doc, rng)
    initial = snapshot(doc)

    budgets = [n_ops // n_clients + (1 if i < n_ops % n_clients else 0) for i in range(n_clients)]
    clients = [_SimClient(i, budgets[i]) for i in range(n_clients)]
    by_cid: dict[int, _SimClient] = {}

    # Event queue: (time_ms, seq, kind, payload). Links deliver in order.
    events: list[tuple] = []
    seq = 0
    link_clock: dict[tuple, float] = {}
    applied_log: list[tuple[int, model.EditOp]] = []

    def push(t: float, kind: str, payload) -> None:
        nonlocal seq
        seq += 1
        heapq.heappush(events, (t, seq, kind, payload))

    def send(link: tuple, t: float, kind: str, payload) -> None:
        arrival = max(t + latency.sample(rng), link_clock.get(link, 0.0))
        link_clock[link] = arrival
        push(arrival, kind, payload)

    def op_gap() -> float:
        return rng.uniform(0.0, 2.0 * latency.max_ms + 20.0)

    for cl in clients:
        cid = core.connect()
        cl.client_id = cid
        by_cid[cid] = cl
        send(("c2s", cid), 0.0, "server", (cid, Hello(f"sim-{cl.index}")))

    def server_event(t: float, cid: int, msg: Message) -> None:
        outs = core.handle_message(cid, msg, now=t / 1000.0)
        for rcid, m in outs:
            if isinstance(m, Applied) and m.version > len(applied_log) + initial.version:
                applied_log.append((m.version, m.op))
            send(("s2c", rcid), t, "client", (rcid, m))

    def client_event(t: float, cid: int, msg: Message) -> None:
        cl = by_cid[cid]
        if isinstance(msg, Welcome):
            send(("c2s", cid), t, "server", (cid, Open(DOC)))
            return
        if isinstance(msg, SnapshotMsg) and cl.cd is None:
            cl.cd = ClientDoc(cid, restore(msg.snapshot, DOC))
            if cl.ops_left > 0:
                push(t + op_gap(), "op", cid)
            return
        event = client_apply(cl.cd, msg)
        if event is not None:
            if event[0] == "applied":
                cl.acks += 1
            else:
                cl.rejects += 1

    def op_event(t: float, cid: int) -> None:
        cl = by_cid[cid]
        if cl.ops_left <= 0:
            return
        cl.ops_left -= 1
        op = cl.make_op(rng)
        cl.cd.pending[op.op_id] = op
        send(("c2s", cid), t, "server", (cid, OpSubmit(DOC, op)))
        if cl.ops_left > 0:
            push(t + op_gap(), "op", cid)

    while events:
        t, _, kind, payload = heapq.heappop(events)
        if kind == "server":
            server_event(t, *payload)
        elif kind == "client":
            client_event(t, *payload)
        else:
            op_event(t, payload)

    server_snap = snapshot(doc)
    server_hash = state_hash(server_snap)
    client_hashes = {cl.client_id: state_hash(cl.cd.snapshot()) for cl in clients}
    equal = all(h == server_hash for h in client_hashes.values())

    # Replaying the server's Applied log from the initial snapshot must
    # reproduce the server state exactly.
    replay = restore(initial, DOC)
    replay_ok = True
    for version, op in applied_log:
        if apply_op(replay, op) is not None or replay.version != version:
            replay_ok = False
            break
    replay_ok = replay_ok and snapshot(replay) == server_snap

    return ConvergenceReport(
        seed=seed,
        n_clients=n_clients,
        n_ops=n_ops,
        server_hash=server_hash,
        client_hashes=client_hashes,
        ops_applied=len(applied_log),
        ops_rejected=sum(cl.rejects for cl in clients),
        acks_per_client={cl.client_id: cl.acks for cl in clients},
        replay_matches=replay_ok,
        equal=equal,
    )


def report_json(report: ConvergenceReport) -> str:
    return json.dumps(report.to_json(), indent=2)

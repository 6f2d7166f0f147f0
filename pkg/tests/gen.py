"""Seeded random generators shared across the test suite."""
from __future__ import annotations

import math
import random
import string

from snbviz import model, protocol
from snbviz.model import Atom, Bond, EditOp, MoleculeDoc, Snapshot, Vec3
from snbviz.pick import Camera, Ray

ELEMENTS = ("C", "N", "O", "S", "P", "H", "Fe", "Ca", "X", "Zn")


def quantized(rng: random.Random, lo: float = -50.0, hi: float = 50.0) -> float:
    """Coordinate that survives 4-decimal fixed-point text exactly."""
    return rng.randint(int(lo * 10000), int(hi * 10000)) / 10000.0


def random_vec(rng: random.Random, lo: float = -50.0, hi: float = 50.0) -> Vec3:
    return Vec3(quantized(rng, lo, hi), quantized(rng, lo, hi), quantized(rng, lo, hi))


def random_valid_op(rng: random.Random, doc: MoleculeDoc, fresh_id: int) -> EditOp:
    """An op that applies cleanly to the current doc state."""
    ids = sorted(doc.atoms)
    bonds = sorted(doc.bonds)
    unbonded = None
    choices = ["add_atom"]
    if ids:
        choices += ["remove_atom", "set_element", "move_atom"]
    if len(ids) >= 2:
        for _ in range(8):
            a, b = rng.sample(ids, 2)
            if Bond.of(a, b) not in doc.bonds:
                unbonded = (a, b)
                break
        if unbonded:
            choices.append("add_bond")
    if bonds:
        choices.append("remove_bond")
    kind = rng.choice(choices)
    if kind == "add_atom":
        return model.add_atom(fresh_id, random_vec(rng), rng.choice(ELEMENTS))
    if kind == "remove_atom":
        return model.remove_atom(rng.choice(ids))
    if kind == "add_bond":
        return model.add_bond(*unbonded)
    if kind == "remove_bond":
        bd = rng.choice(bonds)
        return model.remove_bond(bd.a, bd.b)
    if kind == "set_element":
        return model.set_element(rng.choice(ids), rng.choice(ELEMENTS))
    return model.move_atom(rng.choice(ids), random_vec(rng))


def build_random_doc(rng: random.Random, n_ops: int = 200, name: str = "random") -> MoleculeDoc:
    doc = MoleculeDoc(name)
    next_id = 1
    for _ in range(n_ops):
        op = random_valid_op(rng, doc, next_id)
        if op.kind == model.ADD_ATOM:
            next_id += 1
        reason = model.apply_op(doc, op)
        assert reason is None, f"generator produced invalid op: {reason}"
    return doc


def random_snapshot(rng: random.Random, max_atoms: int = 30, max_bonds: int = 40,
                    box: float = 50.0) -> Snapshot:
    n = rng.randint(0, max_atoms)
    ids = rng.sample(range(1, max_atoms * 10 + 2), n)
    atoms = [Atom(i, random_vec(rng, -box, box), rng.choice(ELEMENTS)) for i in ids]
    bonds = set()
    if n >= 2:
        for _ in range(rng.randint(0, max_bonds)):
            a, b = rng.sample(ids, 2)
            bonds.add(Bond.of(a, b))
    return Snapshot.build(0, atoms, bonds)


def random_scene(rng: random.Random, max_atoms: int = 50, max_bonds: int = 60) -> Snapshot:
    """Pick-test scene: compact coordinates, full float precision."""
    n = rng.randint(1, max_atoms)
    atoms = [Atom(i, Vec3(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)),
                  rng.choice(ELEMENTS)) for i in range(1, n + 1)]
    bonds = set()
    if n >= 2:
        for _ in range(rng.randint(0, max_bonds)):
            a, b = rng.sample(range(1, n + 1), 2)
            bonds.add(Bond.of(a, b))
    return Snapshot.build(0, atoms, bonds)


def random_camera(rng: random.Random) -> Camera:
    yaw = rng.uniform(0, 2 * math.pi)
    pitch = rng.uniform(-1.2, 1.2)
    dist = rng.uniform(8.0, 25.0)
    target = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
    cp = math.cos(pitch)
    eye = target.add(Vec3(cp * math.sin(yaw), math.sin(pitch), cp * math.cos(yaw)).scale(dist))
    forward = target.sub(eye).normalized()
    right = forward.cross(Vec3(0, 1, 0)).normalized()
    up = right.cross(forward)
    return Camera(eye, right, up, forward, rng.uniform(0.5, 1.8), rng.choice((1.0, 4 / 3, 16 / 9)))


def aimed_ray(rng: random.Random, point: Vec3, spread: float = 0.4,
              min_dist: float = 5.0, max_dist: float = 18.0) -> Ray:
    """Ray from a random outside position aimed near ``point``."""
    z = rng.uniform(-1.0, 1.0)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    s = math.sqrt(1.0 - z * z)
    direction = Vec3(s * math.cos(theta), s * math.sin(theta), z)
    origin = point.add(direction.scale(rng.uniform(min_dist, max_dist)))
    target = point.add(Vec3(rng.gauss(0, spread), rng.gauss(0, spread), rng.gauss(0, spread)))
    from snbviz.pick import Ray as _Ray
    return _Ray(origin, target.sub(origin).normalized())


def random_ray_at_scene(rng: random.Random, snap: Snapshot | None) -> Ray:
    """Ray roughly aimed into the scene so hits are common; half the rays
    target a specific atom, the rest come through a random camera."""
    if snap is not None and snap.atoms and rng.random() < 0.6:
        atom = rng.choice(snap.atoms)
        return aimed_ray(rng, atom.pos, spread=0.5)
    cam = random_camera(rng)
    from snbviz.pick import mouse_ray
    return mouse_ray(cam, (rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)))


def random_op_any(rng: random.Random, wire_safe: bool = False,
                  id_pool: tuple[int, ...] = ()) -> EditOp:
    """Arbitrary op, valid-shaped but not necessarily applicable.

    With wire_safe, payloads stay encodable (finite positions); otherwise a
    slice of ops carries bad elements or non-finite positions to exercise
    every rejection reason. ``id_pool`` biases atom ids toward existing ones
    so reference checks are hit both ways.
    """
    kind = rng.choice(model.OP_KINDS)
    op_id = (rng.randint(0, 5), rng.randint(0, 1000))

    def small() -> int:
        if id_pool and rng.random() < 0.7:
            return rng.choice(id_pool)
        return rng.randint(1, 12)

    def pos() -> Vec3:
        if not wire_safe and rng.random() < 0.08:
            bad = rng.choice((math.inf, -math.inf, math.nan))
            return Vec3(bad, quantized(rng), quantized(rng))
        return random_vec(rng)

    def element() -> str:
        if not wire_safe and rng.random() < 0.15:
            return rng.choice(("Zzz", "c", "", "1A"))
        return rng.choice(ELEMENTS + ("Uu", "Qq"))

    if kind == model.ADD_ATOM:
        return model.add_atom(small(), pos(), element(), op_id)
    if kind == model.REMOVE_ATOM:
        return model.remove_atom(small(), op_id)
    if kind == model.ADD_BOND:
        return model.add_bond(small(), small(), op_id)
    if kind == model.REMOVE_BOND:
        return model.remove_bond(small(), small(), op_id)
    if kind == model.SET_ELEMENT:
        return model.set_element(small(), element(), op_id)
    return model.move_atom(small(), pos(), op_id)


def random_name(rng: random.Random, max_len: int = 12) -> str:
    n = rng.randint(1, max_len)
    alphabet = string.ascii_letters + string.digits + "_-. çπ💡"
    return "".join(rng.choice(alphabet) for _ in range(n))


def random_ray(rng: random.Random) -> Ray:
    z = rng.uniform(-1, 1)
    theta = rng.uniform(0, 2 * math.pi)
    s = math.sqrt(1 - z * z)
    return Ray(random_vec(rng), Vec3(s * math.cos(theta), s * math.sin(theta), z))


def random_message(rng: random.Random) -> protocol.Message:
    """Uniformly random well-formed wire message."""
    kind = rng.randrange(12)
    doc = random_name(rng)
    if kind == 0:
        return protocol.Hello(random_name(rng), rng.randint(0, 3))
    if kind == 1:
        return protocol.Welcome(rng.randint(1, 10 ** 6),
                                tuple(random_name(rng) for _ in range(rng.randint(0, 5))))
    if kind == 2:
        return protocol.Open(doc)
    if kind == 3:
        return protocol.SnapshotMsg(doc, random_snapshot(rng, max_atoms=8, max_bonds=8))
    if kind == 4:
        return protocol.OpSubmit(doc, random_op_any(rng, wire_safe=True))
    if kind == 5:
        return protocol.Applied(doc, rng.randint(0, 10 ** 9),
                                random_op_any(rng, wire_safe=True), rng.randint(1, 10 ** 4))
    if kind == 6:
        return protocol.Reject(doc, (rng.randint(0, 10 ** 4), rng.randint(0, 10 ** 6)),
                               rng.choice(("duplicate_bond", "missing_atom", "not_open")))
    if kind == 7:
        return protocol.Presence(doc, rng.randint(1, 10 ** 4), random_ray(rng))
    if kind == 8:
        return protocol.DocReloaded(doc, random_snapshot(rng, max_atoms=6, max_bonds=6),
                                    rng.randint(0, 40))
    if kind == 9:
        return protocol.Ping(rng.randint(0, 2 ** 53))
    if kind == 10:
        return protocol.Pong(rng.randint(0, 2 ** 53))
    return protocol.Error(random_name(rng), random_name(rng, 40))

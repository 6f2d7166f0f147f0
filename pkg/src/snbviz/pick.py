"""Ray picking: mouse-as-wand ray construction and nearest-hit tests
against atom spheres and bond cylinders.

All operations are pure. The same formulas are re-implemented by the web
client and cross-checked against the golden vectors in goldens.py.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .model import Snapshot, Vec3

TIE_EPS = 1e-9
UNIT_EPS = 1e-9


@dataclass(frozen=True)
class Ray:
    """Origin plus unit direction (|dir| = 1 within 1e-9)."""

    origin: Vec3
    dir: Vec3


@dataclass(frozen=True)
class AtomRef:
    id: int


@dataclass(frozen=True)
class BondRef:
    a: int
    b: int


Entity = Union[AtomRef, BondRef]


@dataclass(frozen=True)
class Hit:
    entity: Entity
    t: float  # ray parameter of the hit point, world units, >= 0


@dataclass(frozen=True)
class Camera:
    """Perspective pick camera: eye plus orthonormal right/up/forward basis."""

    eye: Vec3
    right: Vec3
    up: Vec3
    forward: Vec3
    vfov: float  # radians, 0 < vfov < pi
    aspect: float  # width / height

    def validate(self) -> None:
        for name, v in (("right", self.right), ("up", self.up), ("forward", self.forward)):
            if abs(v.norm() - 1.0) > UNIT_EPS:
                raise ValueError(f"camera {name} not unit length")
        for u, v in ((self.right, self.up), (self.up, self.forward), (self.right, self.forward)):
            if abs(u.dot(v)) > UNIT_EPS:
                raise ValueError("camera basis not orthogonal")
        if not 0.0 < self.vfov < math.pi:
            raise ValueError("vfov out of range")
        if self.aspect <= 0.0:
            raise ValueError("aspect must be positive")


@dataclass(frozen=True)
class PickConfig:
    """Pick radii in Å; bonds are thinner than atoms."""

    atom_radius: float = 0.35
    bond_radius: float = 0.12

    def __post_init__(self):
        if self.atom_radius <= 0 or self.bond_radius <= 0:
            raise ValueError("radii must be positive")
        if self.bond_radius >= self.atom_radius:
            raise ValueError("bond_radius must be smaller than atom_radius")


def ray_sphere(ray: Ray, center: Vec3, radius: float) -> Optional[float]:
    """Smallest t >= 0 where the ray meets the sphere surface, else None.
    A ray starting inside returns the exit intersection."""
    oc = ray.origin.sub(center)
    b = oc.dot(ray.dir)
    c = oc.dot(oc) - radius * radius
    disc = b * b - c
    if disc < 0.0:
        return None
    s = math.sqrt(disc)
    t0 = -b - s
    if t0 >= 0.0:
        return t0
    t1 = -b + s
    if t1 >= 0.0:
        return t1
    return None


def ray_cylinder(ray: Ray, p0: Vec3, p1: Vec3, radius: float) -> Optional[float]:
    """Smallest t >= 0 hitting the finite uncapped cylinder around segment
    p0-p1, else None. The hit's axial coordinate must fall within the
    segment; there are no end caps."""
    axis = p1.sub(p0)
    length = axis.norm()
    if length == 0.0:
        raise ValueError("degenerate cylinder: p0 == p1")
    a_hat = axis.scale(1.0 / length)
    o = ray.origin.sub(p0)
    d_axial = ray.dir.dot(a_hat)
    o_axial = o.dot(a_hat)
    d_perp = ray.dir.sub(a_hat.scale(d_axial))
    o_perp = o.sub(a_hat.scale(o_axial))
    qa = d_perp.dot(d_perp)
    qb = 2.0 * d_perp.dot(o_perp)
    qc = o_perp.dot(o_perp) - radius * radius
    if qa <= 1e-18:
        return None  # ray parallel to the axis never crosses the side wall
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        return None
    s = math.sqrt(disc)
    for t in ((-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)):
        if t >= 0.0:
            axial = o_axial + t * d_axial
            if 0.0 <= axial <= length:
                return t
    return None


def mouse_ray(cam: Camera, ndc: tuple[float, float]) -> Ray:
    """Unproject normalized device coordinates (in [-1,1]^2, +y up) through
    the camera image plane into a world-space ray from the eye."""
    half = math.tan(cam.vfov / 2.0)
    d = (
        cam.right.scale(ndc[0] * half * cam.aspect)
        .add(cam.up.scale(ndc[1] * half))
        .add(cam.forward)
    )
    return Ray(cam.eye, d.normalized())


def pick_scene(snap: Snapshot, ray: Ray, cfg: PickConfig = PickConfig()) -> Optional[Hit]:
    """Nearest hit over all atom spheres and bond cylinders.

    Ties within 1e-9 resolve atom before bond, then lowest atom id /
    lexicographic bond pair; the result does not depend on the snapshot's
    iteration order.
    """
    pos = {a.id: a.pos for a in snap.atoms}
    # (t, priority rank, priority key, entity); rank 0 = atom, 1 = bond.
    candidates: list[tuple[float, int, tuple, Entity]] = []
    for atom in snap.atoms:
        t = ray_sphere(ray, atom.pos, cfg.atom_radius)
        if t is not None:
            candidates.append((t, 0, (atom.id,), AtomRef(atom.id)))
    for bd in snap.bonds:
        t = ray_cylinder(ray, pos[bd.a], pos[bd.b], cfg.bond_radius)
        if t is not None:
            candidates.append((t, 1, (bd.a, bd.b), BondRef(bd.a, bd.b)))
    if not candidates:
        return None
    t_min = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= t_min + TIE_EPS]
    t, _, _, entity = min(tied, key=lambda c: (c[1], c[2]))
    return Hit(entity, t)

"""Golden pick vectors: randomized scenes, cameras and rays with the
expected nearest hit, exported as JSON so other implementations of the
pick math (the web client) can prove parity."""
from __future__ import annotations

import json
import math
import random

from .model import Atom, Bond, Snapshot, Vec3
from .pick import AtomRef, Camera, PickConfig, mouse_ray, pick_scene

FIXTURE_VERSION = 1


def _orbit_camera(target: Vec3, distance: float, yaw: float, pitch: float,
                  vfov: float, aspect: float) -> Camera:
    cp = math.cos(pitch)
    eye = target.add(Vec3(cp * math.sin(yaw), math.sin(pitch), cp * math.cos(yaw)).scale(distance))
    forward = target.sub(eye).normalized()
    right = forward.cross(Vec3(0.0, 1.0, 0.0)).normalized()
    up = right.cross(forward)
    return Camera(eye, right, up, forward, vfov, aspect)


def _random_scene(rng: random.Random, max_atoms: int = 18) -> Snapshot:
    n = rng.randint(3, max_atoms)
    atoms = [
        Atom(i, Vec3(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)),
             rng.choice(("C", "N", "O", "S", "X")))
        for i in range(1, n + 1)
    ]
    bonds = set()
    for _ in range(rng.randint(1, 2 * n)):
        a, b = rng.sample(range(1, n + 1), 2)
        bonds.add(Bond.of(a, b))
    return Snapshot.build(0, atoms, bonds)


def _ndc_towards(cam: Camera, point: Vec3) -> tuple[float, float] | None:
    """Project a world point back to NDC; None when behind the camera or
    outside the viewport."""
    v = point.sub(cam.eye)
    depth = v.dot(cam.forward)
    if depth <= 1e-6:
        return None
    half = math.tan(cam.vfov / 2.0)
    x = v.dot(cam.right) / (depth * half * cam.aspect)
    y = v.dot(cam.up) / (depth * half)
    if abs(x) > 1.0 or abs(y) > 1.0:
        return None
    return (x, y)


def generate_pick_fixture(seed: int = 7, n_scenes: int = 10, rays_per_scene: int = 30) -> dict:
    """Build the fixture: per-scene geometry plus rows of
    (camera, ndc, expected hit). Roughly half the rays are aimed near
    scene entities so the fixture is rich in real hits."""
    rng = random.Random(seed)
    scenes = []
    rows = []
    for scene_index in range(n_scenes):
        snap = _random_scene(rng)
        cfg = PickConfig(atom_radius=rng.choice((0.3, 0.35, 0.45)),
                         bond_radius=rng.choice((0.1, 0.12, 0.15)))
        scenes.append({
            "atoms": [{"id": a.id, "pos": [a.pos.x, a.pos.y, a.pos.z], "element": a.element}
                      for a in snap.atoms],
            "bonds": [[b.a, b.b] for b in snap.bonds],
            "atom_radius": cfg.atom_radius,
            "bond_radius": cfg.bond_radius,
        })
        for _ in range(rays_per_scene):
            cam = _orbit_camera(
                target=Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                distance=rng.uniform(8.0, 20.0),
                yaw=rng.uniform(0.0, 2.0 * math.pi),
                pitch=rng.uniform(-1.2, 1.2),
                vfov=rng.uniform(0.5, 1.6),
                aspect=rng.choice((1.0, 4 / 3, 16 / 9)),
            )
            if rng.random() < 0.5 and snap.atoms:
                target_atom = rng.choice(snap.atoms)
                ndc = _ndc_towards(cam, target_atom.pos)
                if ndc is None:
                    ndc = (rng.uniform(-1, 1), rng.uniform(-1, 1))
                else:
                    ndc = (max(-1.0, min(1.0, ndc[0] + rng.uniform(-0.03, 0.03))),
                           max(-1.0, min(1.0, ndc[1] + rng.uniform(-0.03, 0.03))))
            else:
                ndc = (rng.uniform(-1, 1), rng.uniform(-1, 1))
            ray = mouse_ray(cam, ndc)
            hit = pick_scene(snap, ray, cfg)
            if hit is None:
                expected = None
            elif isinstance(hit.entity, AtomRef):
                expected = {"entity": {"kind": "atom", "id": hit.entity.id}, "t": hit.t}
            else:
                expected = {"entity": {"kind": "bond", "a": hit.entity.a, "b": hit.entity.b},
                            "t": hit.t}
            rows.append({
                "scene": scene_index,
                "camera": {
                    "eye": [cam.eye.x, cam.eye.y, cam.eye.z],
                    "right": [cam.right.x, cam.right.y, cam.right.z],
                    "up": [cam.up.x, cam.up.y, cam.up.z],
                    "forward": [cam.forward.x, cam.forward.y, cam.forward.z],
                    "vfov": cam.vfov,
                    "aspect": cam.aspect,
                },
                "ndc": [ndc[0], ndc[1]],
                "hit": expected,
            })
    return {"fixture_version": FIXTURE_VERSION, "seed": seed, "scenes": scenes, "rows": rows}


def write_pick_fixture(path: str, seed: int = 7, n_scenes: int = 10,
                       rays_per_scene: int = 30) -> dict:
    fixture = generate_pick_fixture(seed, n_scenes, rays_per_scene)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fixture, fh, indent=1)
        fh.write("\n")
    return fixture

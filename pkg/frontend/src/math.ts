/**
 * 3D math and picking. The intersection formulas mirror the server
 * implementation and are held to it by the golden-vector fixture.
 */

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export const vec3 = (x: number, y: number, z: number): Vec3 => ({ x, y, z });

export function add(a: Vec3, b: Vec3): Vec3 {
  return { x: a.x + b.x, y: a.y + b.y, z: a.z + b.z };
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return { x: a.x - b.x, y: a.y - b.y, z: a.z - b.z };
}

export function scale(a: Vec3, s: number): Vec3 {
  return { x: a.x * s, y: a.y * s, z: a.z * s };
}

export function dot(a: Vec3, b: Vec3): number {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return {
    x: a.y * b.z - a.z * b.y,
    y: a.z * b.x - a.x * b.z,
    z: a.x * b.y - a.y * b.x,
  };
}

export function norm(a: Vec3): number {
  return Math.sqrt(dot(a, a));
}

export function normalized(a: Vec3): Vec3 {
  const n = norm(a);
  if (n === 0) throw new Error("cannot normalize zero vector");
  return scale(a, 1 / n);
}

export interface Ray {
  origin: Vec3;
  dir: Vec3; // unit length
}

export interface CameraBasis {
  eye: Vec3;
  right: Vec3;
  up: Vec3;
  forward: Vec3;
  vfov: number; // radians
  aspect: number; // width / height
}

export type Entity =
  | { kind: "atom"; id: number }
  | { kind: "bond"; a: number; b: number };

export interface Hit {
  entity: Entity;
  t: number;
}

export interface SceneAtom {
  id: number;
  pos: Vec3;
  element: string;
}

export interface Scene {
  atoms: SceneAtom[];
  bonds: Array<[number, number]>;
}

export interface PickRadii {
  atomRadius: number;
  bondRadius: number;
}

export const DEFAULT_RADII: PickRadii = { atomRadius: 0.35, bondRadius: 0.12 };

const TIE_EPS = 1e-9;

/** Smallest t >= 0 on the sphere surface; rays starting inside exit. */
export function raySphere(ray: Ray, center: Vec3, radius: number): number | null {
  const oc = sub(ray.origin, center);
  const b = dot(oc, ray.dir);
  const c = dot(oc, oc) - radius * radius;
  const disc = b * b - c;
  if (disc < 0) return null;
  const s = Math.sqrt(disc);
  const t0 = -b - s;
  if (t0 >= 0) return t0;
  const t1 = -b + s;
  if (t1 >= 0) return t1;
  return null;
}

/** Finite uncapped cylinder around segment p0-p1. */
export function rayCylinder(ray: Ray, p0: Vec3, p1: Vec3, radius: number): number | null {
  const axis = sub(p1, p0);
  const length = norm(axis);
  if (length === 0) throw new Error("degenerate cylinder");
  const aHat = scale(axis, 1 / length);
  const o = sub(ray.origin, p0);
  const dAxial = dot(ray.dir, aHat);
  const oAxial = dot(o, aHat);
  const dPerp = sub(ray.dir, scale(aHat, dAxial));
  const oPerp = sub(o, scale(aHat, oAxial));
  const qa = dot(dPerp, dPerp);
  const qb = 2 * dot(dPerp, oPerp);
  const qc = dot(oPerp, oPerp) - radius * radius;
  if (qa <= 1e-18) return null; // parallel to the axis: no wall crossing
  const disc = qb * qb - 4 * qa * qc;
  if (disc < 0) return null;
  const s = Math.sqrt(disc);
  for (const t of [(-qb - s) / (2 * qa), (-qb + s) / (2 * qa)]) {
    if (t >= 0) {
      const axial = oAxial + t * dAxial;
      if (axial >= 0 && axial <= length) return t;
    }
  }
  return null;
}

/** Unproject NDC coordinates ([-1,1]^2, +y up) through the image plane. */
export function mouseRay(cam: CameraBasis, ndcX: number, ndcY: number): Ray {
  const half = Math.tan(cam.vfov / 2);
  const d = add(
    add(scale(cam.right, ndcX * half * cam.aspect), scale(cam.up, ndcY * half)),
    cam.forward,
  );
  return { origin: cam.eye, dir: normalized(d) };
}

/** Pixel coordinates (origin top-left) to NDC. */
export function pixelToNdc(px: number, py: number, width: number, height: number): [number, number] {
  return [(2 * px) / width - 1, 1 - (2 * py) / height];
}

type Candidate = { t: number; rank: number; key: number[]; entity: Entity };

/**
 * Nearest hit over atom spheres and bond cylinders. Ties within 1e-9 of
 * the minimum resolve atom before bond, then lowest id / lexicographic
 * pair — the same rule the server applies.
 */
export function pickScene(scene: Scene, ray: Ray, radii: PickRadii = DEFAULT_RADII): Hit | null {
  const pos = new Map<number, Vec3>();
  for (const a of scene.atoms) pos.set(a.id, a.pos);
  const candidates: Candidate[] = [];
  for (const a of scene.atoms) {
    const t = raySphere(ray, a.pos, radii.atomRadius);
    if (t !== null) candidates.push({ t, rank: 0, key: [a.id], entity: { kind: "atom", id: a.id } });
  }
  for (const [a, b] of scene.bonds) {
    const pa = pos.get(a);
    const pb = pos.get(b);
    if (!pa || !pb) continue;
    const t = rayCylinder(ray, pa, pb, radii.bondRadius);
    if (t !== null) candidates.push({ t, rank: 1, key: [a, b], entity: { kind: "bond", a, b } });
  }
  if (candidates.length === 0) return null;
  let tMin = Infinity;
  for (const c of candidates) tMin = Math.min(tMin, c.t);
  let best: Candidate | null = null;
  for (const c of candidates) {
    if (c.t > tMin + TIE_EPS) continue;
    if (best === null || comparePriority(c, best) < 0) best = c;
  }
  return { entity: best!.entity, t: best!.t };
}

function comparePriority(a: Candidate, b: Candidate): number {
  if (a.rank !== b.rank) return a.rank - b.rank;
  const n = Math.max(a.key.length, b.key.length);
  for (let i = 0; i < n; i++) {
    const av = a.key[i] ?? -Infinity;
    const bv = b.key[i] ?? -Infinity;
    if (av !== bv) return av - bv;
  }
  return 0;
}

export function sameEntity(a: Entity | null, b: Entity | null): boolean {
  if (a === null || b === null) return a === b;
  if (a.kind === "atom" && b.kind === "atom") return a.id === b.id;
  if (a.kind === "bond" && b.kind === "bond") return a.a === b.a && a.b === b.b;
  return false;
}

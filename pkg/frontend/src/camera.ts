/** Orbit camera: yaw/pitch/distance around a target point. */
import type { CameraBasis, Vec3 } from "./math.js";
import { add, cross, normalized, scale, sub, vec3 } from "./math.js";

const WORLD_UP = vec3(0, 1, 0);
const PITCH_LIMIT = Math.PI / 2 - 0.05;

export class OrbitCamera {
  target: Vec3 = vec3(0, 0, 0);
  distance = 14;
  yaw = 0.6;
  pitch = 0.3;
  vfov = Math.PI / 3;
  aspect = 1;

  /** Recomputed every frame; always orthonormal. */
  basis(): CameraBasis {
    const cp = Math.cos(this.pitch);
    const offset = vec3(
      cp * Math.sin(this.yaw),
      Math.sin(this.pitch),
      cp * Math.cos(this.yaw),
    );
    const eye = add(this.target, scale(offset, this.distance));
    const forward = normalized(sub(this.target, eye));
    const right = normalized(cross(forward, WORLD_UP));
    const up = cross(right, forward);
    return { eye, right, up, forward, vfov: this.vfov, aspect: this.aspect };
  }

  orbit(dYaw: number, dPitch: number): void {
    this.yaw = (this.yaw + dYaw) % (2 * Math.PI);
    this.pitch = Math.max(-PITCH_LIMIT, Math.min(PITCH_LIMIT, this.pitch + dPitch));
  }

  zoom(factor: number): void {
    this.distance = Math.max(1, Math.min(200, this.distance * factor));
  }

  pan(dxWorld: number, dyWorld: number): void {
    const b = this.basis();
    this.target = add(this.target, add(scale(b.right, dxWorld), scale(b.up, dyWorld)));
  }

  /** Frame the whole molecule. */
  fit(points: Vec3[]): void {
    if (points.length === 0) return;
    let cx = 0, cy = 0, cz = 0;
    for (const p of points) {
      cx += p.x; cy += p.y; cz += p.z;
    }
    const n = points.length;
    this.target = vec3(cx / n, cy / n, cz / n);
    let r = 1;
    for (const p of points) {
      const d = Math.hypot(p.x - this.target.x, p.y - this.target.y, p.z - this.target.z);
      r = Math.max(r, d);
    }
    this.distance = Math.max(4, (r + 1.5) / Math.tan(this.vfov / 2));
  }
}

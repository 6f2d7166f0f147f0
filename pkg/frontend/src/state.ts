/**
 * Client-side replica of one document. The molecular state mutates only
 * inside applyServer(): gestures record pending ops and send op_submit,
 * and the edit becomes visible when the server's applied echo (or a
 * snapshot/doc_reloaded replacement) arrives.
 */
import type { Entity, Ray, Scene, SceneAtom, Vec3 } from "./math.js";
import { sameEntity } from "./math.js";
import type { EditOp, ServerMessage, WireRay, WireSnapshot } from "./protocol.js";
import { opIdKey } from "./protocol.js";

export interface Toast {
  text: string;
  at: number; // ms timestamp
}

export interface ReloadBanner {
  dropped: number;
  at: number;
}

export interface PresenceCursor {
  clientId: number;
  ray: Ray;
  at: number;
}

const bondKey = (a: number, b: number): string => (a < b ? `${a}:${b}` : `${b}:${a}`);

export class ClientStore {
  docName = "";
  clientId = 0;
  docNames: string[] = [];
  version = -1; // -1 until the first snapshot arrives
  atoms = new Map<number, SceneAtom>();
  bonds = new Map<string, [number, number]>();
  pending = new Map<string, EditOp>();
  selected: Entity | null = null;
  toasts: Toast[] = [];
  banner: ReloadBanner | null = null;
  cursors = new Map<number, PresenceCursor>();
  appliedCount = 0;
  rejectedCount = 0;
  reloadCount = 0;
  connected = false;
  lastError = "";

  private now: () => number;

  constructor(now: () => number = () => Date.now()) {
    this.now = now;
  }

  scene(): Scene {
    return {
      atoms: [...this.atoms.values()].sort((a, b) => a.id - b.id),
      bonds: [...this.bonds.values()].sort((x, y) => x[0] - y[0] || x[1] - y[1]),
    };
  }

  atomCount(): number {
    return this.atoms.size;
  }

  bondCount(): number {
    return this.bonds.size;
  }

  /** Record an op this client just sent; state stays untouched. */
  trackPending(op: EditOp): void {
    this.pending.set(opIdKey(op.op_id), op);
  }

  /** The single entry point for every inbound server message. */
  applyServer(msg: ServerMessage): void {
    switch (msg.type) {
      case "welcome":
        this.clientId = msg.client_id;
        this.docNames = msg.doc_names;
        this.connected = true;
        return;
      case "snapshot":
        if (msg.doc !== this.docName) return;
        this.loadSnapshot(msg.snapshot);
        return;
      case "applied": {
        if (msg.doc !== this.docName) return;
        if (msg.version !== this.version + 1) {
          throw new Error(`applied v${msg.version} does not follow local v${this.version}`);
        }
        this.applyOp(msg.op);
        this.version = msg.version;
        this.appliedCount += 1;
        if (msg.origin_client === this.clientId) {
          this.pending.delete(opIdKey(msg.op.op_id));
        }
        return;
      }
      case "reject": {
        if (msg.doc !== this.docName) return;
        const key = opIdKey(msg.op_id);
        if (this.pending.has(key)) {
          this.pending.delete(key);
          this.rejectedCount += 1;
          this.toast(`edit rejected: ${msg.reason}`);
        }
        return;
      }
      case "doc_reloaded":
        if (msg.doc !== this.docName) return;
        this.loadSnapshot(msg.snapshot);
        this.reloadCount += 1;
        this.banner = { dropped: msg.dropped_op_count, at: this.now() };
        return;
      case "presence":
        if (msg.doc !== this.docName || msg.client_id === this.clientId) return;
        this.cursors.set(msg.client_id, {
          clientId: msg.client_id,
          ray: wireRay(msg.cursor),
          at: this.now(),
        });
        return;
      case "error":
        this.lastError = `${msg.code}: ${msg.detail}`;
        this.toast(this.lastError);
        return;
      case "pong":
        return;
    }
  }

  toast(text: string): void {
    this.toasts.push({ text, at: this.now() });
    if (this.toasts.length > 6) this.toasts.shift();
  }

  /** Drop expired toasts/banners/stale cursors; call once per frame. */
  prune(ttlMs = 4000): void {
    const cutoff = this.now() - ttlMs;
    this.toasts = this.toasts.filter((t) => t.at > cutoff);
    if (this.banner && this.banner.at <= cutoff) this.banner = null;
    for (const [id, c] of this.cursors) {
      if (c.at <= cutoff) this.cursors.delete(id);
    }
  }

  private loadSnapshot(snap: WireSnapshot): void {
    this.atoms.clear();
    this.bonds.clear();
    for (const a of snap.atoms) {
      this.atoms.set(a.id, { id: a.id, pos: vec(a.pos), element: a.element });
    }
    for (const [a, b] of snap.bonds) {
      this.bonds.set(bondKey(a, b), a < b ? [a, b] : [b, a]);
    }
    this.version = snap.version;
    if (this.selected && !this.entityExists(this.selected)) this.selected = null;
  }

  private applyOp(op: EditOp): void {
    switch (op.kind) {
      case "add_atom":
        this.atoms.set(op.id, { id: op.id, pos: vec(op.pos), element: op.element });
        break;
      case "remove_atom": {
        this.atoms.delete(op.id);
        for (const [key, [a, b]] of this.bonds) {
          if (a === op.id || b === op.id) this.bonds.delete(key);
        }
        break;
      }
      case "add_bond":
        this.bonds.set(bondKey(op.a, op.b), op.a < op.b ? [op.a, op.b] : [op.b, op.a]);
        break;
      case "remove_bond":
        this.bonds.delete(bondKey(op.a, op.b));
        break;
      case "set_element": {
        const atom = this.atoms.get(op.id);
        if (atom) this.atoms.set(op.id, { ...atom, element: op.element });
        break;
      }
      case "move_atom": {
        const atom = this.atoms.get(op.id);
        if (atom) this.atoms.set(op.id, { ...atom, pos: vec(op.pos) });
        break;
      }
    }
    if (this.selected && !this.entityExists(this.selected)) this.selected = null;
  }

  entityExists(e: Entity): boolean {
    if (e.kind === "atom") return this.atoms.has(e.id);
    return this.bonds.has(bondKey(e.a, e.b));
  }

  select(e: Entity | null): void {
    this.selected = e !== null && !this.entityExists(e) ? null : e;
  }

  isSelected(e: Entity): boolean {
    return sameEntity(this.selected, e);
  }

  /** Pending-op ghosts for rendering: atoms/bonds not yet echoed. */
  ghosts(): { atoms: SceneAtom[]; bonds: Array<[Vec3, Vec3]> } {
    const atoms: SceneAtom[] = [];
    const bonds: Array<[Vec3, Vec3]> = [];
    for (const op of this.pending.values()) {
      if (op.kind === "add_atom" && !this.atoms.has(op.id)) {
        atoms.push({ id: op.id, pos: vec(op.pos), element: op.element });
      } else if (op.kind === "add_bond") {
        const a = this.atoms.get(op.a);
        const b = this.atoms.get(op.b);
        if (a && b) bonds.push([a.pos, b.pos]);
      }
    }
    return { atoms, bonds };
  }
}

function vec(p: [number, number, number]): Vec3 {
  return { x: p[0], y: p[1], z: p[2] };
}

function wireRay(r: WireRay): Ray {
  return { origin: vec(r.origin), dir: vec(r.dir) };
}

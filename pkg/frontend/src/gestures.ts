/**
 * Edit gestures. Gestures only produce op_submit messages (plus local
 * selection); the molecular state changes when the server echo returns,
 * so pending edits render ghosted until then.
 */
import type { CameraBasis, Hit, Vec3 } from "./math.js";
import { add, dot, scale, sub } from "./math.js";
import type { EditMode } from "./hud.js";
import type { EditOp, OpId } from "./protocol.js";
import type { ClientStore } from "./state.js";

export type SendOp = (op: EditOp) => void;

interface DragState {
  atomId: number;
  depth: number; // forward-axis distance of the drag plane
  moved: boolean;
  lastPos: Vec3;
}

export class GestureController {
  mode: EditMode = "select";
  element = "C";
  private seq = 0;
  private bondFirst: number | null = null;
  private drag: DragState | null = null;

  constructor(private store: ClientStore, private send: SendOp) {}

  private nextOpId(): OpId {
    this.seq += 1;
    return [this.store.clientId, this.seq];
  }

  private submit(op: EditOp): void {
    this.store.trackPending(op);
    this.send(op);
  }

  setMode(mode: EditMode): void {
    this.mode = mode;
    this.bondFirst = null;
  }

  /** HUD button actions. */
  action(name: string, camera?: CameraBasis): void {
    if (name.startsWith("mode:")) {
      this.setMode(name.slice(5) as EditMode);
      return;
    }
    if (name.startsWith("element:")) {
      this.element = name.slice(8);
      const sel = this.store.selected;
      if (sel && sel.kind === "atom") {
        this.submit({ kind: "set_element", op_id: this.nextOpId(), id: sel.id, element: this.element });
      }
      return;
    }
    if (name === "delete") {
      this.deleteSelection();
      return;
    }
    if (name === "add-atom" && camera) {
      const p = add(camera.eye, scale(camera.forward, 10));
      this.submit({
        kind: "add_atom", op_id: this.nextOpId(), id: this.freshAtomId(),
        pos: [p.x, p.y, p.z], element: this.element,
      });
    }
  }

  /** Fresh id above everything visible; a concurrent collision surfaces
   * as a duplicate_atom reject toast, never as divergence. */
  private freshAtomId(): number {
    let max = 0;
    for (const id of this.store.atoms.keys()) max = Math.max(max, id);
    for (const op of this.store.pending.values()) {
      if (op.kind === "add_atom") max = Math.max(max, op.id);
    }
    return max + 1;
  }

  deleteSelection(): void {
    const sel = this.store.selected;
    if (!sel) return;
    if (sel.kind === "atom") {
      this.submit({ kind: "remove_atom", op_id: this.nextOpId(), id: sel.id });
    } else {
      this.submit({ kind: "remove_bond", op_id: this.nextOpId(), a: sel.a, b: sel.b });
    }
    this.store.select(null);
  }

  /** Scene click with the pick result (HUD clicks never get here). */
  clickScene(hit: Hit | null): void {
    if (hit === null) {
      this.store.select(null);
      this.bondFirst = null;
      return;
    }
    if (this.mode === "bond" && hit.entity.kind === "atom") {
      if (this.bondFirst === null || this.bondFirst === hit.entity.id) {
        this.bondFirst = hit.entity.id;
        this.store.select(hit.entity);
      } else {
        this.submit({
          kind: "add_bond", op_id: this.nextOpId(),
          a: this.bondFirst, b: hit.entity.id,
        });
        this.bondFirst = null;
        this.store.select(null);
      }
      return;
    }
    this.store.select(hit.entity);
  }

  keyDelete(): void {
    this.deleteSelection();
  }

  /** Move-mode drag; returns true when the drag grabbed an atom. */
  dragStart(hit: Hit | null, camera: CameraBasis): boolean {
    if (this.mode !== "move" || hit === null || hit.entity.kind !== "atom") return false;
    const atom = this.store.atoms.get(hit.entity.id);
    if (!atom) return false;
    this.store.select(hit.entity);
    this.drag = {
      atomId: hit.entity.id,
      depth: dot(sub(atom.pos, camera.eye), camera.forward),
      moved: false,
      lastPos: atom.pos,
    };
    return true;
  }

  /** Pointer ray while dragging: slide the atom on its camera-parallel
   * plane. Only the preview position changes until release. */
  dragMove(rayOrigin: Vec3, rayDir: Vec3, camera: CameraBasis): Vec3 | null {
    if (!this.drag) return null;
    const along = dot(rayDir, camera.forward);
    if (along <= 1e-9) return null;
    const t = this.drag.depth / along;
    const pos = add(rayOrigin, scale(rayDir, t));
    this.drag.moved = true;
    this.drag.lastPos = pos;
    return pos;
  }

  /** Release sends move_atom once, with the final position. */
  dragEnd(): void {
    if (this.drag && this.drag.moved) {
      const p = this.drag.lastPos;
      this.submit({
        kind: "move_atom", op_id: this.nextOpId(), id: this.drag.atomId,
        pos: [p.x, p.y, p.z],
      });
    }
    this.drag = null;
  }

  get dragging(): boolean {
    return this.drag !== null;
  }

  /** Ghost position for the atom being dragged, if any. */
  dragPreview(): { atomId: number; pos: Vec3 } | null {
    if (!this.drag || !this.drag.moved) return null;
    return { atomId: this.drag.atomId, pos: this.drag.lastPos };
  }
}

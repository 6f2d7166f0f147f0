/**
 * Ball-and-stick canvas renderer: perspective-projected spheres as
 * depth-sorted shaded discs, bonds as projected quads, presence cursors
 * as rays, HUD panel in screen space on top.
 */
import type { CameraBasis, Vec3 } from "./math.js";
import { add, dot, scale, sub } from "./math.js";
import type { HudComponent } from "./hud.js";
import type { ClientStore } from "./state.js";
import type { GestureController } from "./gestures.js";

export const ELEMENT_COLORS: Record<string, string> = {
  C: "#4a4a4a",
  N: "#2060c8",
  O: "#cc2a2a",
  S: "#c8a800",
  P: "#d8771e",
  H: "#e8e8e8",
  X: "#909090", // unassigned
};

export function elementColor(element: string): string {
  return ELEMENT_COLORS[element] ?? "#7a4fae";
}

export interface Projected {
  sx: number;
  sy: number;
  depth: number; // forward-axis distance, > 0 when visible
  scalePx: number; // pixels per world unit at that depth
}

/** Perspective projection into pixel coordinates (origin top-left). */
export function projectPoint(cam: CameraBasis, width: number, height: number, p: Vec3): Projected | null {
  const v = sub(p, cam.eye);
  const depth = dot(v, cam.forward);
  if (depth <= 0.05) return null;
  const half = Math.tan(cam.vfov / 2);
  const ndcX = dot(v, cam.right) / (depth * half * cam.aspect);
  const ndcY = dot(v, cam.up) / (depth * half);
  return {
    sx: ((ndcX + 1) / 2) * width,
    sy: ((1 - ndcY) / 2) * height,
    depth,
    scalePx: height / (2 * depth * half),
  };
}

interface DrawItem {
  depth: number;
  draw: (ctx: CanvasRenderingContext2D) => void;
}

const ATOM_RADIUS = 0.35;
const BOND_RADIUS = 0.12;

export function renderFrame(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  store: ClientStore,
  cam: CameraBasis,
  hud: HudComponent[],
  gestures: GestureController,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, width, height);

  const items: DrawItem[] = [];
  const preview = gestures.dragPreview();
  const positions = new Map<number, Vec3>();
  for (const atom of store.atoms.values()) {
    positions.set(atom.id, preview && preview.atomId === atom.id ? preview.pos : atom.pos);
  }

  for (const [a, b] of store.bonds.values()) {
    const pa = positions.get(a);
    const pb = positions.get(b);
    if (!pa || !pb) continue;
    const qa = projectPoint(cam, width, height, pa);
    const qb = projectPoint(cam, width, height, pb);
    if (!qa || !qb) continue;
    const selected = store.selected?.kind === "bond"
      && store.selected.a === Math.min(a, b) && store.selected.b === Math.max(a, b);
    const depth = (qa.depth + qb.depth) / 2;
    items.push({
      depth,
      draw: (c) => {
        c.strokeStyle = selected ? "#7fd0ff" : "#b9b9b9";
        c.lineWidth = Math.max(1.5, BOND_RADIUS * 2 * ((qa.scalePx + qb.scalePx) / 2));
        c.lineCap = "round";
        c.beginPath();
        c.moveTo(qa.sx, qa.sy);
        c.lineTo(qb.sx, qb.sy);
        c.stroke();
      },
    });
  }

  for (const atom of store.atoms.values()) {
    const pos = positions.get(atom.id)!;
    const q = projectPoint(cam, width, height, pos);
    if (!q) continue;
    const r = Math.max(2, ATOM_RADIUS * q.scalePx);
    const selected = store.selected?.kind === "atom" && store.selected.id === atom.id;
    items.push({
      depth: q.depth,
      draw: (c) => {
        const grad = c.createRadialGradient(
          q.sx - r * 0.3, q.sy - r * 0.3, r * 0.15, q.sx, q.sy, r);
        grad.addColorStop(0, "#ffffff");
        grad.addColorStop(0.25, elementColor(atom.element));
        grad.addColorStop(1, "#101010");
        c.fillStyle = grad;
        c.beginPath();
        c.arc(q.sx, q.sy, r, 0, 2 * Math.PI);
        c.fill();
        if (selected) {
          c.strokeStyle = "#7fd0ff";
          c.lineWidth = 2.5;
          c.stroke();
        }
        if (r > 9) {
          c.fillStyle = "#ffffff";
          c.font = `${Math.max(9, r * 0.8)}px sans-serif`;
          c.textAlign = "center";
          c.textBaseline = "middle";
          c.fillText(atom.element, q.sx, q.sy);
        }
      },
    });
  }

  // pending edits, ghosted
  const ghosts = store.ghosts();
  for (const g of ghosts.atoms) {
    const q = projectPoint(cam, width, height, g.pos);
    if (!q) continue;
    const r = Math.max(2, ATOM_RADIUS * q.scalePx);
    items.push({
      depth: q.depth,
      draw: (c) => {
        c.globalAlpha = 0.35;
        c.fillStyle = elementColor(g.element);
        c.beginPath();
        c.arc(q.sx, q.sy, r, 0, 2 * Math.PI);
        c.fill();
        c.globalAlpha = 1;
      },
    });
  }
  for (const [pa, pb] of ghosts.bonds) {
    const qa = projectPoint(cam, width, height, pa);
    const qb = projectPoint(cam, width, height, pb);
    if (!qa || !qb) continue;
    items.push({
      depth: (qa.depth + qb.depth) / 2,
      draw: (c) => {
        c.globalAlpha = 0.35;
        c.strokeStyle = "#dddddd";
        c.lineWidth = 3;
        c.setLineDash([6, 4]);
        c.beginPath();
        c.moveTo(qa.sx, qa.sy);
        c.lineTo(qb.sx, qb.sy);
        c.stroke();
        c.setLineDash([]);
        c.globalAlpha = 1;
      },
    });
  }

  // remote presence cursors as short rays
  for (const cursor of store.cursors.values()) {
    const tip = add(cursor.ray.origin, scale(cursor.ray.dir, 6));
    const qa = projectPoint(cam, width, height, cursor.ray.origin);
    const qb = projectPoint(cam, width, height, tip);
    if (!qa || !qb) continue;
    items.push({
      depth: (qa.depth + qb.depth) / 2,
      draw: (c) => {
        c.strokeStyle = cursorColor(cursor.clientId);
        c.lineWidth = 1.5;
        c.beginPath();
        c.moveTo(qa.sx, qa.sy);
        c.lineTo(qb.sx, qb.sy);
        c.stroke();
        c.fillStyle = c.strokeStyle as string;
        c.beginPath();
        c.arc(qb.sx, qb.sy, 3.5, 0, 2 * Math.PI);
        c.fill();
        c.font = "11px sans-serif";
        c.textAlign = "left";
        c.fillText(`#${cursor.clientId}`, qb.sx + 6, qb.sy - 6);
      },
    });
  }

  items.sort((a, b) => b.depth - a.depth); // painter: far first
  for (const item of items) item.draw(ctx);

  drawHud(ctx, width, store, hud, gestures);
}

function cursorColor(clientId: number): string {
  const hues = [30, 110, 190, 270, 330, 70, 150, 230];
  return `hsl(${hues[clientId % hues.length]}, 80%, 65%)`;
}

function drawHud(
  ctx: CanvasRenderingContext2D,
  width: number,
  store: ClientStore,
  hud: HudComponent[],
  gestures: GestureController,
): void {
  for (const c of hud) {
    if (c.kind === "label") {
      ctx.fillStyle = "#9fb2c8";
      ctx.font = "12px sans-serif";
      ctx.textAlign = "left";
      ctx.textBaseline = "top";
      const sel = store.selected === null ? "none"
        : store.selected.kind === "atom" ? `atom ${store.selected.id}`
        : `bond ${store.selected.a}-${store.selected.b}`;
      ctx.fillText(
        `${store.docName} v${Math.max(store.version, 0)}  atoms ${store.atomCount()} ` +
        `bonds ${store.bondCount()}  selected: ${sel}  pending: ${store.pending.size}`,
        c.x, c.y);
      continue;
    }
    const active = (c.action === `mode:${gestures.mode}`)
      || (c.action === `element:${gestures.element}`);
    ctx.fillStyle = active ? "#2d5f8a" : "#222a36";
    ctx.fillRect(c.x, c.y, c.w, c.h);
    ctx.strokeStyle = "#3c4a5d";
    ctx.strokeRect(c.x, c.y, c.w, c.h);
    if (c.group === "element") {
      ctx.fillStyle = elementColor(c.text);
      ctx.fillRect(c.x + 3, c.y + c.h - 6, c.w - 6, 3);
    }
    ctx.fillStyle = "#e7edf4";
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(c.text, c.x + c.w / 2, c.y + c.h / 2);
  }

  if (store.banner) {
    ctx.fillStyle = "rgba(200, 150, 20, 0.9)";
    ctx.fillRect(0, 44, width, 22);
    ctx.fillStyle = "#141414";
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(
      `file reloaded, ${store.banner.dropped} pending edit(s) dropped`, width / 2, 55);
  }

  let ty = 80;
  ctx.textAlign = "left";
  ctx.textBaseline = "middle";
  for (const toast of store.toasts) {
    ctx.fillStyle = "rgba(30, 34, 44, 0.92)";
    ctx.fillRect(10, ty, 300, 20);
    ctx.fillStyle = "#ffb0a0";
    ctx.font = "12px sans-serif";
    ctx.fillText(toast.text.slice(0, 44), 16, ty + 10);
    ty += 24;
  }
}

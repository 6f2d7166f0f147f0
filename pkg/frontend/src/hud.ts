/**
 * Heads-up display: screen-space buttons and labels drawn over the 3D
 * scene. HUD hit-testing runs before scene picking, so clicks on HUD
 * never reach atoms underneath.
 */

export type HudKind = "button" | "label" | "menu";

export interface HudComponent {
  kind: HudKind;
  action: string; // "" for inert labels
  x: number;
  y: number;
  w: number;
  h: number;
  text: string;
  group: "mode" | "element" | "edit" | "info";
}

export const EDIT_MODES = ["select", "bond", "move"] as const;
export type EditMode = (typeof EDIT_MODES)[number];

export const DEFAULT_PALETTE = ["C", "N", "O", "S", "P", "X"];

const PAD = 8;
const BTN_H = 26;

/** Lay the panel out for the current canvas width; rectangles never
 * overlap within the panel. */
export function layoutHud(width: number, palette: string[] = DEFAULT_PALETTE): HudComponent[] {
  const out: HudComponent[] = [];
  let x = PAD;
  for (const mode of EDIT_MODES) {
    out.push({
      kind: "button", action: `mode:${mode}`, x, y: PAD, w: 58, h: BTN_H,
      text: mode, group: "mode",
    });
    x += 58 + 6;
  }
  x += 12;
  for (const el of palette) {
    out.push({
      kind: "button", action: `element:${el}`, x, y: PAD, w: 30, h: BTN_H,
      text: el, group: "element",
    });
    x += 30 + 4;
  }
  x += 12;
  out.push({
    kind: "button", action: "delete", x, y: PAD, w: 58, h: BTN_H,
    text: "delete", group: "edit",
  });
  x += 58 + 6;
  out.push({
    kind: "button", action: "add-atom", x, y: PAD, w: 70, h: BTN_H,
    text: "add atom", group: "edit",
  });
  out.push({
    kind: "label", action: "", x: PAD, y: PAD + BTN_H + 6, w: Math.max(10, width - 2 * PAD), h: 16,
    text: "", group: "info",
  });
  return out;
}

/** Topmost component under the pixel, or null. */
export function hudHitTest(components: HudComponent[], px: number, py: number): HudComponent | null {
  for (let i = components.length - 1; i >= 0; i--) {
    const c = components[i];
    if (px >= c.x && px <= c.x + c.w && py >= c.y && py <= c.y + c.h) return c;
  }
  return null;
}

export function rectsOverlap(a: HudComponent, b: HudComponent): boolean {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

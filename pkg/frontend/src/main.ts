/**
 * Entry point: URL parameters select the document and display name,
 * the WebSocket carries the shared protocol payloads, and the canvas
 * renders at animation-frame rate.
 *
 *   index.html?doc=demo&name=ada&server=ws://127.0.0.1:5151
 */
import { OrbitCamera } from "./camera.js";
import { GestureController } from "./gestures.js";
import { DEFAULT_PALETTE, hudHitTest, layoutHud } from "./hud.js";
import { DEFAULT_RADII, mouseRay, pickScene, pixelToNdc } from "./math.js";
import { PROTOCOL_VERSION, decodeMessage, encodeMessage } from "./protocol.js";
import type { EditOp } from "./protocol.js";
import { ClientStore } from "./state.js";
import { renderFrame } from "./render.js";

const params = new URLSearchParams(window.location.search);
const docName = params.get("doc") ?? "scratch";
const clientName = params.get("name") ?? "browser";
const serverUrl = params.get("server")
  ?? `ws://${window.location.hostname || "127.0.0.1"}:5151`;
const palette = (params.get("palette") ?? "")
  .split(",")
  .map((s) => s.trim())
  .filter((s) => /^[A-Z][a-z]?$/.test(s));

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const store = new ClientStore();
store.docName = docName;
const camera = new OrbitCamera();

const ws = new WebSocket(serverUrl);
ws.binaryType = "arraybuffer";

function sendRaw(obj: unknown): void {
  if (ws.readyState === WebSocket.OPEN) ws.send(encodeMessage(obj as never));
}

const sendOp = (op: EditOp): void => sendRaw({ type: "op_submit", doc: docName, op });
const gestures = new GestureController(store, sendOp);

ws.onopen = () => {
  sendRaw({ type: "hello", client_name: clientName, protocol_version: PROTOCOL_VERSION });
};

ws.onmessage = (event) => {
  const text = typeof event.data === "string"
    ? event.data
    : new TextDecoder().decode(event.data as ArrayBuffer);
  const msg = decodeMessage(text);
  const firstSnapshot = msg.type === "snapshot" && store.version < 0;
  store.applyServer(msg);
  if (msg.type === "welcome") {
    sendRaw({ type: "open", doc: docName });
  }
  if (firstSnapshot) {
    camera.fit([...store.atoms.values()].map((a) => a.pos));
  }
};

ws.onclose = () => store.toast("connection closed");
ws.onerror = () => store.toast("connection error");

// -- input --------------------------------------------------------------

let orbiting = false;
let lastX = 0;
let lastY = 0;
let downAt: { x: number; y: number } | null = null;
let lastPresence = 0;

function scenePick(px: number, py: number) {
  const [nx, ny] = pixelToNdc(px, py, canvas.width, canvas.height);
  const ray = mouseRay(camera.basis(), nx, ny);
  return pickScene(store.scene(), ray, DEFAULT_RADII);
}

canvas.addEventListener("pointerdown", (e) => {
  canvas.setPointerCapture(e.pointerId);
  lastX = e.offsetX;
  lastY = e.offsetY;
  downAt = { x: e.offsetX, y: e.offsetY };
  const hudHit = hudHitTest(hud, e.offsetX, e.offsetY);
  if (hudHit) return; // resolved on pointerup as a click
  if (gestures.mode === "move" && gestures.dragStart(scenePick(e.offsetX, e.offsetY), camera.basis())) {
    return;
  }
  orbiting = true;
});

canvas.addEventListener("pointermove", (e) => {
  const dx = e.offsetX - lastX;
  const dy = e.offsetY - lastY;
  lastX = e.offsetX;
  lastY = e.offsetY;
  if (gestures.dragging) {
    const [nx, ny] = pixelToNdc(e.offsetX, e.offsetY, canvas.width, canvas.height);
    const ray = mouseRay(camera.basis(), nx, ny);
    gestures.dragMove(ray.origin, ray.dir, camera.basis());
    return;
  }
  if (orbiting && e.buttons) {
    camera.orbit(-dx * 0.008, dy * 0.008);
  }
  const now = performance.now();
  if (now - lastPresence > 100 && store.connected) { // client-side 10 Hz cap
    lastPresence = now;
    const [nx, ny] = pixelToNdc(e.offsetX, e.offsetY, canvas.width, canvas.height);
    const ray = mouseRay(camera.basis(), nx, ny);
    sendRaw({
      type: "presence", doc: docName, client_id: store.clientId,
      cursor: {
        origin: [ray.origin.x, ray.origin.y, ray.origin.z],
        dir: [ray.dir.x, ray.dir.y, ray.dir.z],
      },
    });
  }
});

canvas.addEventListener("pointerup", (e) => {
  orbiting = false;
  if (gestures.dragging) {
    gestures.dragEnd();
    return;
  }
  if (!downAt) return;
  const moved = Math.hypot(e.offsetX - downAt.x, e.offsetY - downAt.y);
  downAt = null;
  if (moved > 4) return; // it was an orbit drag, not a click
  const hudHit = hudHitTest(hud, e.offsetX, e.offsetY);
  if (hudHit && hudHit.action) {
    gestures.action(hudHit.action, camera.basis());
    return; // HUD priority: never falls through to the scene
  }
  if (!hudHit) gestures.clickScene(scenePick(e.offsetX, e.offsetY));
});

canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  camera.zoom(e.deltaY > 0 ? 1.1 : 1 / 1.1);
});

window.addEventListener("keydown", (e) => {
  if (e.key === "Delete" || e.key === "Backspace") gestures.keyDelete();
  if (e.key === "b") gestures.setMode("bond");
  if (e.key === "s") gestures.setMode("select");
  if (e.key === "m") gestures.setMode("move");
});

// -- frame loop -----------------------------------------------------------

const paletteOrDefault = palette.length ? palette : DEFAULT_PALETTE;
let hud = layoutHud(canvas.width, paletteOrDefault);

function resize(): void {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight;
  camera.aspect = canvas.width / canvas.height;
  hud = layoutHud(canvas.width, paletteOrDefault);
}
window.addEventListener("resize", resize);
resize();

function frame(): void {
  store.prune();
  renderFrame(ctx, canvas.width, canvas.height, store, camera.basis(), hud, gestures);
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);

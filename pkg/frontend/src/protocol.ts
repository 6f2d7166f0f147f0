/**
 * Wire messages as they appear on the WebSocket: one JSON payload per
 * binary frame, identical to the TCP payloads (see docs/PROTOCOL.md in
 * the repository root). Types here are the wire shapes themselves.
 */

export type OpId = [number, number]; // [client_id, seq]

export type EditOp =
  | { kind: "add_atom"; op_id: OpId; id: number; pos: [number, number, number]; element: string }
  | { kind: "remove_atom"; op_id: OpId; id: number }
  | { kind: "add_bond"; op_id: OpId; a: number; b: number }
  | { kind: "remove_bond"; op_id: OpId; a: number; b: number }
  | { kind: "set_element"; op_id: OpId; id: number; element: string }
  | { kind: "move_atom"; op_id: OpId; id: number; pos: [number, number, number] };

export interface WireAtom {
  id: number;
  pos: [number, number, number];
  element: string;
}

export interface WireSnapshot {
  version: number;
  atoms: WireAtom[];
  bonds: Array<[number, number]>;
}

export interface WireRay {
  origin: [number, number, number];
  dir: [number, number, number];
}

export type ServerMessage =
  | { type: "welcome"; client_id: number; doc_names: string[] }
  | { type: "snapshot"; doc: string; snapshot: WireSnapshot }
  | { type: "applied"; doc: string; version: number; op: EditOp; origin_client: number }
  | { type: "reject"; doc: string; op_id: OpId; reason: string }
  | { type: "presence"; doc: string; client_id: number; cursor: WireRay }
  | { type: "doc_reloaded"; doc: string; snapshot: WireSnapshot; dropped_op_count: number }
  | { type: "pong"; nonce: number }
  | { type: "error"; code: string; detail: string };

export type ClientMessage =
  | { type: "hello"; client_name: string; protocol_version: number }
  | { type: "open"; doc: string }
  | { type: "op_submit"; doc: string; op: EditOp }
  | { type: "presence"; doc: string; client_id: number; cursor: WireRay }
  | { type: "ping"; nonce: number };

export const PROTOCOL_VERSION = 1;

export class ProtocolError extends Error {}

const SERVER_TYPES = new Set([
  "welcome", "snapshot", "applied", "reject", "presence",
  "doc_reloaded", "pong", "error",
]);

export function encodeMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isVec(v: unknown): v is [number, number, number] {
  return Array.isArray(v) && v.length === 3 && v.every(isNum);
}

function isOpId(v: unknown): v is OpId {
  return Array.isArray(v) && v.length === 2 && v.every((n) => Number.isInteger(n));
}

function checkOp(op: any): asserts op is EditOp {
  if (typeof op !== "object" || op === null) throw new ProtocolError("op must be an object");
  if (!isOpId(op.op_id)) throw new ProtocolError("bad op_id");
  switch (op.kind) {
    case "add_atom":
      if (!Number.isInteger(op.id) || !isVec(op.pos) || typeof op.element !== "string")
        throw new ProtocolError("bad add_atom payload");
      return;
    case "remove_atom":
      if (!Number.isInteger(op.id)) throw new ProtocolError("bad remove_atom payload");
      return;
    case "add_bond":
    case "remove_bond":
      if (!Number.isInteger(op.a) || !Number.isInteger(op.b))
        throw new ProtocolError(`bad ${op.kind} payload`);
      return;
    case "set_element":
      if (!Number.isInteger(op.id) || typeof op.element !== "string")
        throw new ProtocolError("bad set_element payload");
      return;
    case "move_atom":
      if (!Number.isInteger(op.id) || !isVec(op.pos)) throw new ProtocolError("bad move_atom payload");
      return;
    default:
      throw new ProtocolError(`unknown op kind ${String(op.kind)}`);
  }
}

function checkSnapshot(s: any): asserts s is WireSnapshot {
  if (typeof s !== "object" || s === null) throw new ProtocolError("snapshot must be an object");
  if (!Number.isInteger(s.version)) throw new ProtocolError("snapshot.version must be an integer");
  if (!Array.isArray(s.atoms) || !Array.isArray(s.bonds)) throw new ProtocolError("bad snapshot lists");
  for (const a of s.atoms) {
    if (!Number.isInteger(a?.id) || !isVec(a?.pos) || typeof a?.element !== "string")
      throw new ProtocolError("bad snapshot atom");
  }
  for (const b of s.bonds) {
    if (!Array.isArray(b) || b.length !== 2 || !b.every((n: unknown) => Number.isInteger(n)))
      throw new ProtocolError("bad snapshot bond");
  }
}

/** Parse and validate one inbound payload. */
export function decodeMessage(data: string): ServerMessage {
  let obj: any;
  try {
    obj = JSON.parse(data);
  } catch {
    throw new ProtocolError("malformed JSON payload");
  }
  if (typeof obj !== "object" || obj === null || typeof obj.type !== "string")
    throw new ProtocolError("missing type tag");
  if (!SERVER_TYPES.has(obj.type)) throw new ProtocolError(`unknown type ${obj.type}`);
  switch (obj.type) {
    case "welcome":
      if (!Number.isInteger(obj.client_id) || !Array.isArray(obj.doc_names))
        throw new ProtocolError("bad welcome");
      break;
    case "snapshot":
    case "doc_reloaded":
      if (typeof obj.doc !== "string") throw new ProtocolError("bad doc");
      checkSnapshot(obj.snapshot);
      if (obj.type === "doc_reloaded" && !Number.isInteger(obj.dropped_op_count))
        throw new ProtocolError("bad dropped_op_count");
      break;
    case "applied":
      if (typeof obj.doc !== "string" || !Number.isInteger(obj.version)
          || !Number.isInteger(obj.origin_client))
        throw new ProtocolError("bad applied");
      checkOp(obj.op);
      break;
    case "reject":
      if (typeof obj.doc !== "string" || !isOpId(obj.op_id) || typeof obj.reason !== "string")
        throw new ProtocolError("bad reject");
      break;
    case "presence":
      if (typeof obj.doc !== "string" || !Number.isInteger(obj.client_id)
          || !isVec(obj.cursor?.origin) || !isVec(obj.cursor?.dir))
        throw new ProtocolError("bad presence");
      break;
    case "pong":
      if (!Number.isInteger(obj.nonce)) throw new ProtocolError("bad pong");
      break;
    case "error":
      if (typeof obj.code !== "string" || typeof obj.detail !== "string")
        throw new ProtocolError("bad error");
      break;
  }
  return obj as ServerMessage;
}

export const opIdKey = (id: OpId): string => `${id[0]}:${id[1]}`;

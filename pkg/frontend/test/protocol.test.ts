/** Wire payload encode/decode against frozen cross-implementation strings. */
import { describe, expect, it } from "vitest";

import { ProtocolError, decodeMessage, encodeMessage } from "../src/protocol.js";

describe("encode", () => {
  it("hello matches the reference payload byte for byte", () => {
    expect(encodeMessage({ type: "hello", client_name: "ada", protocol_version: 1 }))
      .toBe('{"type":"hello","client_name":"ada","protocol_version":1}');
  });

  it("ping matches the framing example payload", () => {
    expect(encodeMessage({ type: "ping", nonce: 0 })).toBe('{"type":"ping","nonce":0}');
  });

  it("op_submit carries the wire op shape", () => {
    const text = encodeMessage({
      type: "op_submit", doc: "m",
      op: { kind: "add_bond", op_id: [4, 9], a: 1, b: 2 },
    });
    expect(JSON.parse(text)).toEqual({
      type: "op_submit", doc: "m",
      op: { kind: "add_bond", op_id: [4, 9], a: 1, b: 2 },
    });
  });
});

describe("decode", () => {
  it("applied round-trips through the store shapes", () => {
    const msg = decodeMessage(JSON.stringify({
      type: "applied", doc: "m", version: 4,
      op: { kind: "move_atom", op_id: [2, 7], id: 3, pos: [0.5, -1, 2.25] },
      origin_client: 2,
    }));
    expect(msg.type).toBe("applied");
    if (msg.type === "applied") {
      expect(msg.version).toBe(4);
      expect(msg.op.kind).toBe("move_atom");
    }
  });

  it("rejects malformed JSON", () => {
    expect(() => decodeMessage("{nope")).toThrow(ProtocolError);
  });

  it("rejects unknown type tags", () => {
    expect(() => decodeMessage('{"type":"warp"}')).toThrow(ProtocolError);
  });

  it("rejects a client-only type arriving from the server", () => {
    expect(() => decodeMessage('{"type":"op_submit","doc":"m","op":{}}')).toThrow(ProtocolError);
  });

  it("rejects bad op payloads", () => {
    expect(() => decodeMessage(JSON.stringify({
      type: "applied", doc: "m", version: 1,
      op: { kind: "add_atom", op_id: [1, 1], id: 1 }, // pos/element missing
      origin_client: 1,
    }))).toThrow(ProtocolError);
  });

  it("rejects non-finite coordinates", () => {
    expect(() => decodeMessage(JSON.stringify({
      type: "presence", doc: "m", client_id: 3,
      cursor: { origin: [0, 0, 0], dir: [null, 0, 0] },
    }))).toThrow(ProtocolError);
  });

  it("accepts every server message type", () => {
    const snap = { version: 0, atoms: [], bonds: [] };
    const ok = [
      { type: "welcome", client_id: 1, doc_names: ["a"] },
      { type: "snapshot", doc: "d", snapshot: snap },
      {
        type: "applied", doc: "d", version: 1,
        op: { kind: "remove_atom", op_id: [1, 1], id: 4 }, origin_client: 1,
      },
      { type: "reject", doc: "d", op_id: [1, 2], reason: "not_open" },
      {
        type: "presence", doc: "d", client_id: 2,
        cursor: { origin: [0, 0, 0], dir: [0, 0, -1] },
      },
      { type: "doc_reloaded", doc: "d", snapshot: snap, dropped_op_count: 1 },
      { type: "pong", nonce: 9 },
      { type: "error", code: "unknown_document", detail: "d" },
    ];
    for (const obj of ok) {
      expect(decodeMessage(JSON.stringify(obj)).type).toBe(obj.type);
    }
  });
});

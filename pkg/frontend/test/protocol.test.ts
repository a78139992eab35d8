// Frame codec interop: decode server-encoded bytes, round-trip our own.

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { decodeFrame, encodeFrame, Envelope, LengthMismatch, MalformedBody,
         UnknownKind } from "../src/protocol.js";

const fixture = JSON.parse(readFileSync(new URL("../fixtures/frames.json", import.meta.url), "utf-8"));

function fromHex(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}

describe("codec", () => {
  it("decodes every server-encoded fixture frame", () => {
    for (const { hex, envelope } of fixture.frames) {
      const env = decodeFrame(fromHex(hex));
      expect(env.kind).toBe(envelope.kind);
      expect(env.sender).toBe(envelope.sender);
      expect(env.session_time_ms).toBe(envelope.session_time_ms);
      expect(env.payload).toEqual(envelope.payload);
      expect(env.seq).toBe(envelope.seq);
    }
  });

  it("round trips its own frames", () => {
    const env: Envelope = {
      kind: "Command",
      sender: "c3",
      session_time_ms: 42,
      payload: { command_id: "c3-1", body: { kind: "SetMode", mode: "Review" } },
    };
    expect(decodeFrame(encodeFrame(env))).toEqual(env);
    const withSeq: Envelope = { ...env, kind: "Delta", seq: 7 };
    expect(decodeFrame(encodeFrame(withSeq))).toEqual(withSeq);
  });

  it("uses a four-byte big-endian length prefix", () => {
    const frame = encodeFrame({ kind: "Ping", sender: "", session_time_ms: 0,
                                payload: { t0: 1 } });
    const declared = new DataView(frame.buffer).getUint32(0, false);
    expect(declared).toBe(frame.length - 4);
  });

  it("classifies malformed input", () => {
    expect(() => decodeFrame(new Uint8Array([0, 1]))).toThrow(LengthMismatch);
    const short = new Uint8Array(54);
    new DataView(short.buffer).setUint32(0, 100, false);
    expect(() => decodeFrame(short)).toThrow(LengthMismatch);

    const badKind = new TextEncoder().encode(
      '{"kind":"Teleport2","sender":"","session_time_ms":0,"payload":{}}');
    const frame = new Uint8Array(4 + badKind.length);
    new DataView(frame.buffer).setUint32(0, badKind.length, false);
    frame.set(badKind, 4);
    expect(() => decodeFrame(frame)).toThrow(UnknownKind);

    const garbage = new TextEncoder().encode("{not json");
    const gframe = new Uint8Array(4 + garbage.length);
    new DataView(gframe.buffer).setUint32(0, garbage.length, false);
    gframe.set(garbage, 4);
    expect(() => decodeFrame(gframe)).toThrow(MalformedBody);
  });
});

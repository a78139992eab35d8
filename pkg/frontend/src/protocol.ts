// Wire protocol: 4-byte big-endian length prefix + UTF-8 JSON envelope,
// inside binary WebSocket frames. Kind and field names are normative and
// case-sensitive; they must match the server byte for byte.

import { EffectDict, SceneState, ShapeDict, PoseDict, SequenceDict } from "./scene.js";

export const MESSAGE_KINDS = new Set([
  "Hello", "Welcome", "Ping", "Pong", "Command", "Delta",
  "SnapshotRequest", "Snapshot", "Reject", "Bye",
]);

export interface Envelope {
  kind: string;
  sender: string;
  session_time_ms: number;
  payload: Record<string, unknown>;
  seq?: number;
}

export class FrameError extends Error {}
export class LengthMismatch extends FrameError {}
export class UnknownKind extends FrameError {}
export class MalformedBody extends FrameError {}

export function encodeFrame(env: Envelope): Uint8Array {
  const obj: Record<string, unknown> = {
    kind: env.kind,
    sender: env.sender,
    session_time_ms: env.session_time_ms,
    payload: env.payload,
  };
  if (env.seq !== undefined) obj.seq = env.seq;
  const body = new TextEncoder().encode(JSON.stringify(obj));
  const frame = new Uint8Array(4 + body.length);
  new DataView(frame.buffer).setUint32(0, body.length, false);
  frame.set(body, 4);
  return frame;
}

export function decodeFrame(data: Uint8Array): Envelope {
  if (data.length < 4) {
    throw new LengthMismatch(`frame too short for length prefix (${data.length} bytes)`);
  }
  const declared = new DataView(data.buffer, data.byteOffset, data.byteLength).getUint32(0, false);
  if (data.length - 4 !== declared) {
    throw new LengthMismatch(`declared ${declared} body bytes, got ${data.length - 4}`);
  }
  let obj: unknown;
  try {
    obj = JSON.parse(new TextDecoder("utf-8", { fatal: true }).decode(data.subarray(4)));
  } catch (e) {
    throw new MalformedBody(String(e));
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new MalformedBody("frame body must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  const kind = rec.kind;
  if (typeof kind !== "string") throw new MalformedBody("missing kind");
  if (!MESSAGE_KINDS.has(kind)) throw new UnknownKind(`unknown message kind ${kind}`);
  const sender = rec.sender;
  const t = rec.session_time_ms;
  const payload = rec.payload;
  const seq = rec.seq;
  if (typeof sender !== "string" || typeof t !== "number" || !Number.isInteger(t)
      || typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    throw new MalformedBody("bad sender/session_time_ms/payload");
  }
  if (seq !== undefined && seq !== null && !Number.isInteger(seq)) {
    throw new MalformedBody("seq must be an integer");
  }
  return {
    kind,
    sender,
    session_time_ms: t,
    payload: payload as Record<string, unknown>,
    seq: seq === null ? undefined : (seq as number | undefined),
  };
}

// -- command bodies -------------------------------------------------------------

export type CommandBody =
  | { kind: "SpawnEntity"; entity: unknown }
  | { kind: "RemoveEntity"; id: string }
  | { kind: "TeleportEntity"; id: string; pose: PoseDict }
  | { kind: "RetargetEntity"; id: string; target: [number, number] }
  | { kind: "AddAnnotation"; annotation: { id: string; shape: ShapeDict; priority: number; created_at: number; author: string } }
  | { kind: "RemoveAnnotation"; id: string }
  | { kind: "SetMode"; mode: SceneState["mode"] }
  | { kind: "LoadSequence"; sequence: SequenceDict }
  | { kind: "PlaybackControl"; action: "play" | "pause" | "seek" | "stop"; rate?: number; position_ms?: number }
  | { kind: "PlayerPose"; id: string; pose: PoseDict };

export interface DeltaPayload {
  seq: number;
  effect: EffectDict;
}

export interface WelcomePayload {
  client_id: string;
  role: { role: "Coach" | "Player" | "Observer"; entity_id?: string };
  snapshot: SceneState;
  seq: number;
}

export interface SnapshotPayload {
  scene: SceneState;
  seq: number;
}

export interface RejectPayload {
  command_id: string;
  reason: string;
}

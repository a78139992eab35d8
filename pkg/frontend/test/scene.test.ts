// Mirror fidelity: applying the server's recorded delta stream must land on
// the server's final hash, and the gap/stale rules must match the protocol.

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { Mirror } from "../src/client.js";
import { Envelope } from "../src/protocol.js";
import {
  applyDelta,
  EffectDict,
  initialScene,
  sceneHash,
  SceneState,
  SequenceGapError,
  adoptSnapshot,
} from "../src/scene.js";

const session = JSON.parse(readFileSync(new URL("../fixtures/session50.json", import.meta.url), "utf-8"));

function loadSnapshot(): SceneState {
  const scene = initialScene();
  adoptSnapshot(scene, session.snapshot as SceneState);
  scene.version = session.snapshot_seq;
  return scene;
}

describe("scripted 50-command session", () => {
  it("mirror hash equals the server hash after applying every delta", () => {
    const scene = loadSnapshot();
    for (const d of session.deltas) {
      expect(applyDelta(scene, d.seq, d.effect as EffectDict)).toBe("applied");
    }
    expect(scene.version).toBe(session.final_version);
    expect(sceneHash(scene)).toBe(session.final_hash);
  });

  it("stale deltas are dropped without changing the hash", () => {
    const scene = loadSnapshot();
    for (const d of session.deltas) applyDelta(scene, d.seq, d.effect as EffectDict);
    const before = sceneHash(scene);
    expect(applyDelta(scene, 3, session.deltas[2].effect as EffectDict)).toBe("stale");
    expect(sceneHash(scene)).toBe(before);
  });

  it("a sequence gap raises so the client can request a snapshot", () => {
    const scene = loadSnapshot();
    applyDelta(scene, 1, session.deltas[0].effect as EffectDict);
    const far = session.deltas[10];
    expect(() => applyDelta(scene, far.seq, far.effect as EffectDict))
      .toThrow(SequenceGapError);
  });
});

describe("mirror state machine", () => {
  function welcomeEnv(): Envelope {
    return {
      kind: "Welcome",
      sender: "server",
      session_time_ms: 0,
      payload: {
        client_id: "c9",
        role: { role: "Observer" },
        snapshot: session.snapshot,
        seq: session.snapshot_seq,
      },
    };
  }

  function deltaEnv(d: { seq: number; session_time_ms: number; effect: unknown }): Envelope {
    return {
      kind: "Delta",
      sender: "server",
      session_time_ms: d.session_time_ms,
      payload: { seq: d.seq, effect: d.effect },
      seq: d.seq,
    };
  }

  it("welcome then contiguous deltas converge to the server hash", () => {
    const mirror = new Mirror();
    mirror.handle(welcomeEnv(), 0);
    expect(mirror.welcomed).toBe(true);
    for (const d of session.deltas) {
      const out = mirror.handle(deltaEnv(d), d.session_time_ms);
      expect(out).toEqual([]);
    }
    expect(sceneHash(mirror.scene)).toBe(session.final_hash);
  });

  it("a gap emits one SnapshotRequest and recovery adopts the snapshot", () => {
    const mirror = new Mirror();
    mirror.handle(welcomeEnv(), 0);
    mirror.handle(deltaEnv(session.deltas[0]), 10);
    const out = mirror.handle(deltaEnv(session.deltas[5]), 20);
    expect(out.length).toBe(1);
    expect(out[0].kind).toBe("SnapshotRequest");
    // duplicate gap within the retry window does not spam
    expect(mirror.handle(deltaEnv(session.deltas[6]), 30)).toEqual([]);

    const finalScene = loadSnapshot();
    for (const d of session.deltas) applyDelta(finalScene, d.seq, d.effect as EffectDict);
    const snap: Envelope = {
      kind: "Snapshot",
      sender: "server",
      session_time_ms: 0,
      payload: { scene: finalScene, seq: finalScene.version },
    };
    mirror.handle(snap, 40);
    expect(sceneHash(mirror.scene)).toBe(session.final_hash);
  });

  it("idle polling asks for a snapshot after silence", () => {
    const mirror = new Mirror();
    mirror.handle(welcomeEnv(), 0);
    expect(mirror.poll(100)).toEqual([]);
    const out = mirror.poll(700);
    expect(out.length).toBe(1);
    expect(out[0].kind).toBe("SnapshotRequest");
    expect(mirror.poll(800)).toEqual([]); // retry interval respected
  });
});

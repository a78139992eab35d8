// Replication client. The mirror state machine is synchronous and pure-ish
// (testable without sockets); BoardClient binds it to a WebSocket with hello
// retry, idle snapshot polling, and reconnect.

import { CommandBody, DeltaPayload, Envelope, RejectPayload, SnapshotPayload,
         WelcomePayload, decodeFrame, encodeFrame } from "./protocol.js";
import { SceneState, SequenceGapError, adoptSnapshot, applyDelta,
         initialScene } from "./scene.js";

export const IDLE_SNAPSHOT_MS = 600;
export const REQUEST_RETRY_MS = 500;

export interface MirrorEvents {
  onScene?: (scene: SceneState) => void;
  onWelcome?: (payload: WelcomePayload) => void;
  onReject?: (payload: RejectPayload) => void;
}

/** Applies server frames to the local scene; emits follow-up requests. */
export class Mirror {
  scene: SceneState = initialScene();
  welcomed = false;
  clientId: string | null = null;
  role: WelcomePayload["role"] | null = null;
  lastBroadcastAt: number | null = null;
  lastRequestAt: number | null = null;

  constructor(private readonly events: MirrorEvents = {}) {}

  /** Returns envelopes to send back (snapshot requests). */
  handle(env: Envelope, nowMs: number): Envelope[] {
    switch (env.kind) {
      case "Welcome": {
        const payload = env.payload as unknown as WelcomePayload;
        this.clientId = payload.client_id;
        this.role = payload.role;
        this.scene = initialScene();
        adoptSnapshot(this.scene, payload.snapshot);
        this.scene.version = payload.seq;
        this.welcomed = true;
        this.lastBroadcastAt = nowMs;
        this.events.onWelcome?.(payload);
        this.events.onScene?.(this.scene);
        return [];
      }
      case "Delta": {
        this.lastBroadcastAt = nowMs;
        const payload = env.payload as unknown as DeltaPayload;
        try {
          if (applyDelta(this.scene, payload.seq, payload.effect) === "applied") {
            this.events.onScene?.(this.scene);
          }
        } catch (e) {
          if (e instanceof SequenceGapError) {
            return this.maybeSnapshotRequest(nowMs);
          }
          throw e;
        }
        return [];
      }
      case "Snapshot": {
        this.lastBroadcastAt = nowMs;
        const payload = env.payload as unknown as SnapshotPayload;
        if (payload.seq >= this.scene.version) {
          adoptSnapshot(this.scene, payload.scene);
          this.scene.version = payload.seq;
          this.events.onScene?.(this.scene);
        }
        return [];
      }
      case "Reject":
        this.events.onReject?.(env.payload as unknown as RejectPayload);
        return [];
      default:
        return [];
    }
  }

  /** Idle upkeep: ask for a snapshot when the server has gone quiet. */
  poll(nowMs: number): Envelope[] {
    if (!this.welcomed) return [];
    const stale = this.lastBroadcastAt === null
      || nowMs - this.lastBroadcastAt >= IDLE_SNAPSHOT_MS;
    return stale ? this.maybeSnapshotRequest(nowMs) : [];
  }

  private maybeSnapshotRequest(nowMs: number): Envelope[] {
    if (this.lastRequestAt !== null && nowMs - this.lastRequestAt < REQUEST_RETRY_MS) {
      return [];
    }
    this.lastRequestAt = nowMs;
    return [{
      kind: "SnapshotRequest",
      sender: this.clientId ?? "",
      session_time_ms: Math.round(nowMs),
      payload: {},
    }];
  }
}

export interface BoardClientOptions {
  url: string;
  desiredRole: "Coach" | "Player" | "Observer";
  entityId?: string;
  events?: MirrorEvents & {
    onStatus?: (status: "connecting" | "open" | "closed") => void;
  };
}

export class BoardClient {
  readonly mirror: Mirror;
  private ws: WebSocket | null = null;
  private commandCounter = 0;
  private pollTimer: number | null = null;
  private closed = false;

  constructor(private readonly options: BoardClientOptions) {
    this.mirror = new Mirror(options.events ?? {});
  }

  connect(): void {
    this.closed = false;
    this.options.events?.onStatus?.("connecting");
    const ws = new WebSocket(this.options.url);
    ws.binaryType = "arraybuffer";
    this.ws = ws;
    ws.onopen = () => {
      this.options.events?.onStatus?.("open");
      const payload: Record<string, unknown> = { desired_role: this.options.desiredRole };
      if (this.options.entityId) payload.entity_id = this.options.entityId;
      this.sendEnvelope({ kind: "Hello", sender: "", session_time_ms: 0, payload });
      this.pollTimer = window.setInterval(() => {
        for (const env of this.mirror.poll(performance.now())) this.sendEnvelope(env);
      }, 200);
    };
    ws.onmessage = (event: MessageEvent) => {
      const data = new Uint8Array(event.data as ArrayBuffer);
      const env = decodeFrame(data);
      for (const reply of this.mirror.handle(env, performance.now())) {
        this.sendEnvelope(reply);
      }
    };
    ws.onclose = () => {
      this.options.events?.onStatus?.("closed");
      if (this.pollTimer !== null) window.clearInterval(this.pollTimer);
      this.mirror.welcomed = false;
      if (!this.closed) {
        window.setTimeout(() => this.connect(), 1000); // snapshot-on-reconnect
      }
    };
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  sendCommand(body: CommandBody): string {
    this.commandCounter += 1;
    const commandId = `${this.mirror.clientId ?? "pre"}-${this.commandCounter}`;
    this.sendEnvelope({
      kind: "Command",
      sender: this.mirror.clientId ?? "",
      session_time_ms: 0,
      payload: { command_id: commandId, body },
    });
    return commandId;
  }

  private sendEnvelope(env: Envelope): void {
    if (this.ws !== null && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(encodeFrame(env));
    }
  }
}

// Local mirror of the authoritative scene. The board never mutates this
// directly; everything flows through applyDelta with the server's sequence
// numbers, and sceneHash() must agree with the server's digest bit for bit.

import {
  CanonNode,
  cfloat,
  cint,
  fnv1a64Text,
  serializeCanon,
} from "./canon.js";

export interface PitchDict {
  length_m: number;
  width_m: number;
}

export interface PoseDict {
  x: number;
  y: number;
  z: number;
  yaw: number;
}

export type ControllerDict =
  | { kind: "Coach" }
  | { kind: "PlayerClient"; client_id: string };

export interface EntityDict {
  id: string;
  kind: "Player" | "Ball" | "Cone";
  team: "Home" | "Away" | null;
  label: string;
  pose: PoseDict;
  controller: ControllerDict;
  height_m: number;
  speed_mps: number;
}

export type ShapeDict =
  | { kind: "Polyline"; points: [number, number][] }
  | { kind: "Arrow2D"; start: [number, number]; end: [number, number] }
  | { kind: "Arrow3D"; start: [number, number, number]; end: [number, number, number] }
  | { kind: "Zone"; points: [number, number][] }
  | { kind: "Marker"; point: [number, number]; text: string };

export interface AnnotationDict {
  id: string;
  shape: ShapeDict;
  priority: number;
  created_at: number;
  author: string;
}

export interface PlanDict {
  entity_id: string;
  from: [number, number];
  to: [number, number];
  start_ms: number;
  duration_ms: number;
  anticipation_ms: number;
  easing: "Linear" | "Smoothstep";
}

export interface WarningDict {
  a: string;
  b: string;
  min_distance_m: number;
  t_ms: number;
}

export interface SequenceDict {
  id: string;
  name: string;
  tracks: Record<string, [number, number, number][]>;
  warnings: WarningDict[];
}

export interface PlaybackDict {
  state: "stopped" | "paused" | "playing";
  playhead_ms: number;
  rate?: number;
  anchor_ms?: number;
}

export interface SceneState {
  pitch: PitchDict;
  entities: Record<string, EntityDict>;
  annotations: Record<string, AnnotationDict>;
  mode: "Lecture" | "Rehearsal" | "Review";
  plans: Record<string, PlanDict>;
  sequence: SequenceDict | null;
  playback: PlaybackDict | null;
  version: number;
}

export type EffectDict =
  | { kind: "EntityUpsert"; entity: EntityDict }
  | { kind: "EntityRemove"; id: string }
  | { kind: "AnnotationUpsert"; annotation: AnnotationDict }
  | { kind: "AnnotationRemove"; id: string }
  | { kind: "ModeChange"; mode: SceneState["mode"] }
  | { kind: "PlanStart"; plan: PlanDict }
  | { kind: "PlanEnd"; entity_id: string }
  | { kind: "SequenceLoad"; sequence: SequenceDict }
  | { kind: "PlaybackChange"; playback: PlaybackDict }
  | { kind: "PoseUpdate"; id: string; pose: PoseDict; cancel_plan: boolean; speed_mps?: number };

export class SequenceGapError extends Error {}

export function initialScene(pitch?: PitchDict): SceneState {
  return {
    pitch: pitch ?? { length_m: 105.0, width_m: 68.0 },
    entities: {},
    annotations: {},
    mode: "Lecture",
    plans: {},
    sequence: null,
    playback: null,
    version: 0,
  };
}

export type ApplyResult = "applied" | "stale";

/**
 * Apply one replicated delta in place. Stale deltas are dropped silently;
 * a sequence gap throws so the caller can request a snapshot.
 */
export function applyDelta(scene: SceneState, seq: number, effect: EffectDict): ApplyResult {
  if (seq <= scene.version) return "stale";
  if (seq > scene.version + 1) {
    throw new SequenceGapError(`delta seq ${seq} onto version ${scene.version}`);
  }
  switch (effect.kind) {
    case "EntityUpsert":
      scene.entities[effect.entity.id] = effect.entity;
      break;
    case "EntityRemove":
      delete scene.entities[effect.id];
      delete scene.plans[effect.id];
      break;
    case "AnnotationUpsert":
      scene.annotations[effect.annotation.id] = effect.annotation;
      break;
    case "AnnotationRemove":
      delete scene.annotations[effect.id];
      break;
    case "ModeChange":
      scene.mode = effect.mode;
      break;
    case "PlanStart":
      scene.plans[effect.plan.entity_id] = effect.plan;
      break;
    case "PlanEnd":
      delete scene.plans[effect.entity_id];
      break;
    case "SequenceLoad":
      scene.sequence = effect.sequence;
      scene.playback = { state: "stopped", playhead_ms: 0 };
      break;
    case "PlaybackChange":
      scene.playback = effect.playback;
      break;
    case "PoseUpdate": {
      const ent = scene.entities[effect.id];
      if (ent !== undefined) {
        ent.pose = effect.pose;
        if (effect.speed_mps !== undefined && effect.speed_mps !== null) {
          ent.speed_mps = effect.speed_mps;
        }
        if (effect.cancel_plan) {
          delete scene.plans[effect.id];
        }
      }
      break;
    }
  }
  scene.version = seq;
  return "applied";
}

export function adoptSnapshot(scene: SceneState, snapshot: SceneState): void {
  scene.pitch = snapshot.pitch;
  scene.entities = snapshot.entities;
  scene.annotations = snapshot.annotations;
  scene.mode = snapshot.mode;
  scene.plans = snapshot.plans ?? {};
  scene.sequence = snapshot.sequence ?? null;
  scene.playback = snapshot.playback ?? null;
  scene.version = snapshot.version;
}

// -- canonical serialization --------------------------------------------------

function canonPose(p: PoseDict): CanonNode {
  return { x: cfloat(p.x), y: cfloat(p.y), z: cfloat(p.z), yaw: cfloat(p.yaw) };
}

function canonEntity(e: EntityDict): CanonNode {
  const controller: CanonNode =
    e.controller.kind === "Coach"
      ? { kind: "Coach" }
      : { kind: "PlayerClient", client_id: e.controller.client_id };
  return {
    id: e.id,
    kind: e.kind,
    team: e.team,
    label: e.label,
    pose: canonPose(e.pose),
    controller,
    height_m: cfloat(e.height_m),
    speed_mps: cfloat(e.speed_mps),
  };
}

function canonShape(s: ShapeDict): CanonNode {
  switch (s.kind) {
    case "Polyline":
    case "Zone":
      return { kind: s.kind, points: s.points.map((p) => p.map(cfloat)) };
    case "Arrow2D":
    case "Arrow3D":
      return { kind: s.kind, start: s.start.map(cfloat), end: s.end.map(cfloat) };
    case "Marker":
      return { kind: s.kind, point: s.point.map(cfloat), text: s.text };
  }
}

function canonAnnotation(a: AnnotationDict): CanonNode {
  return {
    id: a.id,
    shape: canonShape(a.shape),
    priority: cint(a.priority),
    created_at: cint(a.created_at),
    author: a.author,
  };
}

function canonPlan(p: PlanDict): CanonNode {
  return {
    entity_id: p.entity_id,
    from: p.from.map(cfloat),
    to: p.to.map(cfloat),
    start_ms: cint(p.start_ms),
    duration_ms: cint(p.duration_ms),
    anticipation_ms: cint(p.anticipation_ms),
    easing: p.easing,
  };
}

function canonSequence(s: SequenceDict): CanonNode {
  const tracks: { [k: string]: CanonNode } = {};
  for (const [eid, kfs] of Object.entries(s.tracks)) {
    tracks[eid] = kfs.map(([t, x, y]) => [cint(t), cfloat(x), cfloat(y)]);
  }
  return {
    id: s.id,
    name: s.name,
    tracks,
    warnings: s.warnings.map((w) => ({
      a: w.a,
      b: w.b,
      min_distance_m: cfloat(w.min_distance_m),
      t_ms: cint(w.t_ms),
    })),
  };
}

function canonPlayback(p: PlaybackDict): CanonNode {
  const node: { [k: string]: CanonNode } = {
    state: p.state,
    playhead_ms: cint(p.playhead_ms),
  };
  if (p.state === "playing") {
    node.rate = cfloat(p.rate!);
    node.anchor_ms = cint(p.anchor_ms!);
  }
  return node;
}

export function canonicalSceneJson(scene: SceneState): string {
  const entities: { [k: string]: CanonNode } = {};
  for (const [eid, e] of Object.entries(scene.entities)) entities[eid] = canonEntity(e);
  const annotations: { [k: string]: CanonNode } = {};
  for (const [aid, a] of Object.entries(scene.annotations)) {
    annotations[aid] = canonAnnotation(a);
  }
  const plans: { [k: string]: CanonNode } = {};
  for (const [eid, p] of Object.entries(scene.plans)) plans[eid] = canonPlan(p);
  const root: CanonNode = {
    pitch: { length_m: cfloat(scene.pitch.length_m), width_m: cfloat(scene.pitch.width_m) },
    entities,
    annotations,
    mode: scene.mode,
    plans,
    sequence: scene.sequence === null ? null : canonSequence(scene.sequence),
    playback: scene.playback === null ? null : canonPlayback(scene.playback),
    version: cint(scene.version),
  };
  return serializeCanon(root);
}

export function sceneHash(scene: SceneState): string {
  return fnv1a64Text(canonicalSceneJson(scene));
}

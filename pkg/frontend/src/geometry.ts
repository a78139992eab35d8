// Cross-view math, reproduced from the server's formulas rather than trusted
// from rendered output, so any drift between the two is caught by the golden
// projection test at the 1e-6 NDC level.

import { AnnotationDict, PitchDict, PoseDict, ShapeDict } from "./scene.js";

export interface BoardPoint {
  u: number;
  v: number;
}

export interface CameraParams {
  eye_height_m: number;
  hfov_rad: number;
  aspect: number;
  near_m: number;
  pitch_rad: number;
}

export const DEFAULT_CAMERA: CameraParams = {
  eye_height_m: 1.7,
  hfov_rad: Math.PI / 2,
  aspect: 16 / 9,
  near_m: 0.1,
  pitch_rad: 0,
};

export const DEFAULT_N_MAX = 5;
export const DEFAULT_D_REF_M = 15;

// Edge slack mirroring the server: tan(pi/4) rounds below 1 and would cull
// points exactly on the frustum boundary.
const EDGE_EPS = 1e-9;

export interface NdcPoint {
  x: number;
  y: number;
  depth_m: number;
}

export function boardToWorld(p: BoardPoint, pitch: PitchDict): [number, number] {
  return [(p.u - 0.5) * pitch.length_m, (p.v - 0.5) * pitch.width_m];
}

export function worldToBoard(
  x: number,
  y: number,
  pitch: PitchDict,
): { point: BoardPoint; outOfBounds: boolean } {
  let u = x / pitch.length_m + 0.5;
  let v = y / pitch.width_m + 0.5;
  const outOfBounds = !(u >= 0 && u <= 1 && v >= 0 && v <= 1);
  if (outOfBounds) {
    u = Math.min(1, Math.max(0, u));
    v = Math.min(1, Math.max(0, v));
  }
  return { point: { u, v }, outOfBounds };
}

export function fpvProject(
  viewer: PoseDict,
  cam: CameraParams,
  point: [number, number, number],
): NdcPoint | null {
  const eye = [viewer.x, viewer.y, viewer.z + cam.eye_height_m];
  const cy = Math.cos(viewer.yaw);
  const sy = Math.sin(viewer.yaw);
  const cp = Math.cos(cam.pitch_rad);
  const sp = Math.sin(cam.pitch_rad);
  const forward = [cy * cp, sy * cp, sp];
  const right = [sy, -cy, 0];
  const up = [
    right[1] * forward[2] - right[2] * forward[1],
    right[2] * forward[0] - right[0] * forward[2],
    right[0] * forward[1] - right[1] * forward[0],
  ];
  const dx = point[0] - eye[0];
  const dy = point[1] - eye[1];
  const dz = point[2] - eye[2];
  const cf = dx * forward[0] + dy * forward[1] + dz * forward[2];
  if (cf <= cam.near_m) return null;
  const halfW = cf * Math.tan(cam.hfov_rad / 2);
  const halfH = halfW / cam.aspect;
  const cr = dx * right[0] + dy * right[1] + dz * right[2];
  const cu = dx * up[0] + dy * up[1] + dz * up[2];
  const x = cr / halfW;
  const y = cu / halfH;
  if (Math.abs(x) > 1 + EDGE_EPS || Math.abs(y) > 1 + EDGE_EPS) return null;
  return {
    x: Math.min(1, Math.max(-1, x)),
    y: Math.min(1, Math.max(-1, y)),
    depth_m: cf,
  };
}

/** Pixel mapping for the preview canvas: NDC +y up, pixels +y down. */
export function ndcToPixel(ndc: NdcPoint, width: number, height: number): [number, number] {
  return [((ndc.x + 1) / 2) * width, ((1 - ndc.y) / 2) * height];
}

export function billboardSize(baseM: number, distanceM: number, dRefM = DEFAULT_D_REF_M): number {
  if (baseM <= 0 || dRefM <= 0) throw new Error("baseM and dRefM must be > 0");
  if (distanceM < 0) throw new Error("distanceM must be >= 0");
  return distanceM <= dRefM ? baseM : baseM * (distanceM / dRefM);
}

export function shapeGroundPoints(shape: ShapeDict): [number, number][] {
  switch (shape.kind) {
    case "Polyline":
    case "Zone":
      return shape.points.map((p) => [p[0], p[1]]);
    case "Arrow2D":
      return [shape.start, shape.end];
    case "Arrow3D":
      return [
        [shape.start[0], shape.start[1]],
        [shape.end[0], shape.end[1]],
      ];
    case "Marker":
      return [shape.point];
  }
}

function groundAnchor(a: AnnotationDict): [number, number] {
  const pts = shapeGroundPoints(a.shape);
  let sx = 0;
  let sy = 0;
  for (const [x, y] of pts) {
    sx += x;
    sy += y;
  }
  return [sx / pts.length, sy / pts.length];
}

/**
 * At most nMax annotations, ordered by priority desc, newest first, ground
 * distance to the viewer, then id. Pure and order-independent.
 */
export function selectVisibleAnnotations(
  annotations: AnnotationDict[],
  viewer: PoseDict,
  nMax = DEFAULT_N_MAX,
): AnnotationDict[] {
  if (nMax <= 0) return [];
  const keyed = annotations.map((a) => {
    const [ax, ay] = groundAnchor(a);
    const d = Math.hypot(ax - viewer.x, ay - viewer.y);
    return { a, key: [-a.priority, -a.created_at, d, a.id] as const };
  });
  keyed.sort((p, q) => {
    for (let i = 0; i < 3; i++) {
      const d = (p.key[i] as number) - (q.key[i] as number);
      if (d !== 0) return d;
    }
    return p.key[3] < q.key[3] ? -1 : p.key[3] > q.key[3] ? 1 : 0;
  });
  return keyed.slice(0, nMax).map((k) => k.a);
}

export interface BoardShape {
  kind: "Polyline" | "Arrow2D" | "Zone" | "Marker";
  points: [number, number][];
  text: string;
}

export function minimapFootprint(a: AnnotationDict, pitch: PitchDict): BoardShape {
  const pts = shapeGroundPoints(a.shape).map(([x, y]) => {
    const { point } = worldToBoard(x, y, pitch);
    return [point.u, point.v] as [number, number];
  });
  const kind = a.shape.kind === "Arrow3D" ? "Arrow2D" : a.shape.kind;
  const text = a.shape.kind === "Marker" ? a.shape.text : "";
  return { kind, points: pts, text };
}

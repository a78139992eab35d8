// First-person wireframe preview: projects entities and the filtered
// annotation set with the exact server formulas, then paints simple
// primitives. Projection assembly is pure so the golden test can compare it
// against the server-emitted NDC reference.

import {
  CameraParams,
  DEFAULT_CAMERA,
  DEFAULT_N_MAX,
  billboardSize,
  fpvProject,
  ndcToPixel,
  NdcPoint,
  selectVisibleAnnotations,
  shapeGroundPoints,
} from "./geometry.js";
import { AnnotationDict, SceneState } from "./scene.js";

export interface ProjectedEntity {
  id: string;
  foot: NdcPoint | null;
  head: NdcPoint | null;
}

export interface ProjectedAnnotation {
  id: string;
  kind: AnnotationDict["shape"]["kind"];
  vertices: (NdcPoint | null)[];
  markerSizeM?: number;
  text?: string;
}

export interface FpvFrame {
  viewerId: string;
  entities: ProjectedEntity[];
  annotations: ProjectedAnnotation[];
}

function annotationPoints(a: AnnotationDict): [number, number, number][] {
  if (a.shape.kind === "Arrow3D") {
    return [a.shape.start, a.shape.end];
  }
  return shapeGroundPoints(a.shape).map(([x, y]) => [x, y, 0]);
}

export function projectScene(
  scene: SceneState,
  viewerId: string,
  cam: CameraParams = DEFAULT_CAMERA,
  nMax = DEFAULT_N_MAX,
): FpvFrame {
  const viewerEnt = scene.entities[viewerId];
  if (viewerEnt === undefined) {
    throw new Error(`no viewer entity ${viewerId}`);
  }
  const viewer = viewerEnt.pose;
  const entities: ProjectedEntity[] = [];
  for (const eid of Object.keys(scene.entities).sort()) {
    if (eid === viewerId) continue;
    const ent = scene.entities[eid];
    entities.push({
      id: eid,
      foot: fpvProject(viewer, cam, [ent.pose.x, ent.pose.y, ent.pose.z]),
      head: fpvProject(viewer, cam, [ent.pose.x, ent.pose.y, ent.pose.z + ent.height_m]),
    });
  }
  const visible = selectVisibleAnnotations(Object.values(scene.annotations), viewer, nMax);
  const annotations: ProjectedAnnotation[] = visible.map((a) => {
    const vertices = annotationPoints(a).map((p) => fpvProject(viewer, cam, p));
    const proj: ProjectedAnnotation = { id: a.id, kind: a.shape.kind, vertices };
    if (a.shape.kind === "Marker") {
      const d = Math.hypot(a.shape.point[0] - viewer.x, a.shape.point[1] - viewer.y);
      proj.markerSizeM = billboardSize(0.5, d);
      proj.text = a.shape.text;
    }
    return proj;
  });
  return { viewerId, entities, annotations };
}

export class FpvRenderer {
  constructor(
    private readonly ctx: CanvasRenderingContext2D,
    public width = 800,
    public height = 450,
  ) {}

  render(frame: FpvFrame): void {
    const { ctx, width, height } = this;
    ctx.fillStyle = "#0f172a";
    ctx.fillRect(0, 0, width, height);
    // horizon hint
    ctx.strokeStyle = "rgba(148,163,184,0.4)";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(0, height / 2);
    ctx.lineTo(width, height / 2);
    ctx.stroke();

    ctx.strokeStyle = "#fb923c";
    ctx.fillStyle = "#fb923c";
    for (const ann of frame.annotations) {
      const pts = ann.vertices
        .filter((v): v is NdcPoint => v !== null)
        .map((v) => ndcToPixel(v, width, height));
      if (pts.length === 0) continue;
      if (ann.kind === "Marker") {
        const [px, py] = pts[0];
        const r = Math.max(2, 40 / (ann.vertices[0]?.depth_m ?? 10));
        ctx.beginPath();
        ctx.arc(px, py, r, 0, 2 * Math.PI);
        ctx.fill();
        if (ann.text) {
          ctx.font = "11px sans-serif";
          ctx.fillText(ann.text, px + r + 2, py);
        }
        continue;
      }
      ctx.beginPath();
      ctx.moveTo(pts[0][0], pts[0][1]);
      for (const [px, py] of pts.slice(1)) ctx.lineTo(px, py);
      if (ann.kind === "Zone") ctx.closePath();
      ctx.stroke();
    }

    for (const ent of frame.entities) {
      if (ent.foot === null && ent.head === null) continue;
      const foot = ent.foot ? ndcToPixel(ent.foot, width, height) : null;
      const head = ent.head ? ndcToPixel(ent.head, width, height) : null;
      ctx.strokeStyle = "#e2e8f0";
      ctx.lineWidth = 2;
      if (foot && head) {
        ctx.beginPath();
        ctx.moveTo(foot[0], foot[1]);
        ctx.lineTo(head[0], head[1]);
        ctx.stroke();
      }
      const top = head ?? foot!;
      ctx.beginPath();
      ctx.arc(top[0], top[1], 4, 0, 2 * Math.PI);
      ctx.stroke();
      ctx.fillStyle = "#e2e8f0";
      ctx.font = "10px sans-serif";
      ctx.fillText(ent.id, top[0] + 6, top[1] - 4);
    }
  }
}

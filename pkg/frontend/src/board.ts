// The 2D tactic board: rendering and pointer handling over a canvas, with
// every outbound mutation expressed as a protocol Command. Command builders
// are pure functions so the affine math is testable without a DOM.

import { boardToWorld, minimapFootprint, worldToBoard } from "./geometry.js";
import { CommandBody } from "./protocol.js";
import { PitchDict, SceneState } from "./scene.js";

export type Tool = "Select" | "Arrow2D" | "Arrow3D" | "Polyline" | "Zone" | "Marker";

export const TOOLS: Tool[] = ["Select", "Arrow2D", "Arrow3D", "Polyline", "Zone", "Marker"];

let annotationCounter = 0;

export function nextAnnotationId(): string {
  annotationCounter += 1;
  return `ui-a${annotationCounter}`;
}

export type RetargetCommand = Extract<CommandBody, { kind: "RetargetEntity" }>;

/** Drag release: retarget the avatar to the drop point's world position. */
export function dragReleaseCommand(
  entityId: string,
  u: number,
  v: number,
  pitch: PitchDict,
): RetargetCommand {
  const [x, y] = boardToWorld({ u, v }, pitch);
  return { kind: "RetargetEntity", id: entityId, target: [x, y] };
}

export function annotationCommand(
  tool: Exclude<Tool, "Select">,
  boardPoints: [number, number][],
  pitch: PitchDict,
  options: { priority?: number; text?: string; apexHeightM?: number; id?: string } = {},
): CommandBody {
  const world = boardPoints.map(([u, v]) => boardToWorld({ u, v }, pitch));
  const id = options.id ?? nextAnnotationId();
  const priority = options.priority ?? 0;
  let shape;
  switch (tool) {
    case "Arrow2D":
      shape = { kind: "Arrow2D" as const, start: world[0], end: world[world.length - 1] };
      break;
    case "Arrow3D": {
      const h = options.apexHeightM ?? 2.0;
      shape = {
        kind: "Arrow3D" as const,
        start: [world[0][0], world[0][1], 0] as [number, number, number],
        end: [world[world.length - 1][0], world[world.length - 1][1], h] as [number, number, number],
      };
      break;
    }
    case "Polyline":
      shape = { kind: "Polyline" as const, points: world };
      break;
    case "Zone":
      shape = { kind: "Zone" as const, points: world };
      break;
    case "Marker":
      shape = { kind: "Marker" as const, point: world[0], text: options.text ?? "" };
      break;
  }
  return {
    kind: "AddAnnotation",
    annotation: { id, shape, priority, created_at: 0, author: "" },
  };
}

export function setModeCommand(mode: SceneState["mode"]): CommandBody {
  return { kind: "SetMode", mode };
}

export function playbackCommand(
  action: "play" | "pause" | "seek" | "stop",
  options: { rate?: number; positionMs?: number } = {},
): CommandBody {
  const body: CommandBody = { kind: "PlaybackControl", action };
  if (options.rate !== undefined) body.rate = options.rate;
  if (options.positionMs !== undefined) body.position_ms = options.positionMs;
  return body;
}

/** Current playhead for the scrubber, derived from the replicated anchor. */
export function playheadAt(scene: SceneState, sessionNowMs: number): number {
  const pb = scene.playback;
  if (pb === null) return 0;
  if (pb.state !== "playing") return pb.playhead_ms;
  return pb.playhead_ms + (sessionNowMs - pb.anchor_ms!) * pb.rate!;
}

// -- rendering ------------------------------------------------------------------

export interface BoardMetrics {
  width: number;
  height: number;
  margin: number;
}

export function boardToCanvas(
  u: number,
  v: number,
  m: BoardMetrics,
): [number, number] {
  return [
    m.margin + u * (m.width - 2 * m.margin),
    m.margin + (1 - v) * (m.height - 2 * m.margin),
  ];
}

export function canvasToBoard(
  px: number,
  py: number,
  m: BoardMetrics,
): [number, number] {
  const u = (px - m.margin) / (m.width - 2 * m.margin);
  const v = 1 - (py - m.margin) / (m.height - 2 * m.margin);
  return [Math.min(1, Math.max(0, u)), Math.min(1, Math.max(0, v))];
}

const TEAM_COLORS: Record<string, string> = {
  Home: "#2563eb",
  Away: "#dc2626",
};

export class BoardRenderer {
  constructor(
    private readonly ctx: CanvasRenderingContext2D,
    public metrics: BoardMetrics,
  ) {}

  render(scene: SceneState, selected: string | null, ghosts = true): void {
    const { ctx, metrics } = this;
    ctx.clearRect(0, 0, metrics.width, metrics.height);
    this.drawPitch(scene.pitch);
    for (const ann of Object.values(scene.annotations)) {
      this.drawAnnotation(minimapFootprint(ann, scene.pitch));
    }
    if (ghosts) {
      for (const plan of Object.values(scene.plans)) {
        this.drawGhost(plan.from, plan.to, scene.pitch);
      }
    }
    for (const ent of Object.values(scene.entities)) {
      this.drawEntity(ent, scene.pitch, ent.id === selected);
    }
  }

  private drawPitch(pitch: PitchDict): void {
    const { ctx } = this;
    const [x0, y0] = boardToCanvas(0, 1, this.metrics);
    const [x1, y1] = boardToCanvas(1, 0, this.metrics);
    ctx.fillStyle = "#14532d";
    ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
    ctx.strokeStyle = "rgba(255,255,255,0.8)";
    ctx.lineWidth = 1.5;
    ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
    const [mx0, my0] = boardToCanvas(0.5, 1, this.metrics);
    const [, my1] = boardToCanvas(0.5, 0, this.metrics);
    ctx.beginPath();
    ctx.moveTo(mx0, my0);
    ctx.lineTo(mx0, my1);
    ctx.stroke();
    const [cx, cy] = boardToCanvas(0.5, 0.5, this.metrics);
    ctx.beginPath();
    ctx.arc(cx, cy, ((9.15 / pitch.length_m) * (x1 - x0)), 0, 2 * Math.PI);
    ctx.stroke();
  }

  private drawEntity(ent: SceneState["entities"][string], pitch: PitchDict, selected: boolean): void {
    const { ctx } = this;
    const { point } = worldToBoard(ent.pose.x, ent.pose.y, pitch);
    const [px, py] = boardToCanvas(point.u, point.v, this.metrics);
    const r = ent.kind === "Ball" ? 5 : 9;
    ctx.beginPath();
    ctx.arc(px, py, r, 0, 2 * Math.PI);
    ctx.fillStyle = ent.kind === "Ball" ? "#f8fafc"
      : ent.kind === "Cone" ? "#f59e0b"
      : TEAM_COLORS[ent.team ?? ""] ?? "#6b7280";
    ctx.fill();
    if (selected) {
      ctx.strokeStyle = "#fde047";
      ctx.lineWidth = 3;
      ctx.stroke();
    }
    if (ent.kind === "Player") {
      // facing tick
      ctx.beginPath();
      ctx.moveTo(px, py);
      ctx.lineTo(px + 14 * Math.cos(-ent.pose.yaw), py + 14 * Math.sin(-ent.pose.yaw));
      ctx.strokeStyle = "rgba(255,255,255,0.9)";
      ctx.lineWidth = 2;
      ctx.stroke();
      ctx.fillStyle = "#fff";
      ctx.font = "10px sans-serif";
      ctx.fillText(ent.label || ent.id, px + 10, py - 10);
    }
  }

  private drawGhost(from: [number, number], to: [number, number], pitch: PitchDict): void {
    const { ctx } = this;
    const a = worldToBoard(from[0], from[1], pitch).point;
    const b = worldToBoard(to[0], to[1], pitch).point;
    const [ax, ay] = boardToCanvas(a.u, a.v, this.metrics);
    const [bx, by] = boardToCanvas(b.u, b.v, this.metrics);
    ctx.setLineDash([6, 4]);
    ctx.strokeStyle = "rgba(253,224,71,0.9)";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.beginPath();
    ctx.arc(bx, by, 8, 0, 2 * Math.PI);
    ctx.stroke();
  }

  private drawAnnotation(fp: ReturnType<typeof minimapFootprint>): void {
    const { ctx } = this;
    const pts = fp.points.map(([u, v]) => boardToCanvas(u, v, this.metrics));
    ctx.strokeStyle = "#fb923c";
    ctx.fillStyle = "#fb923c";
    ctx.lineWidth = 2;
    if (fp.kind === "Marker") {
      const [px, py] = pts[0];
      ctx.beginPath();
      ctx.arc(px, py, 4, 0, 2 * Math.PI);
      ctx.fill();
      if (fp.text) {
        ctx.font = "10px sans-serif";
        ctx.fillText(fp.text, px + 6, py - 6);
      }
      return;
    }
    ctx.beginPath();
    ctx.moveTo(pts[0][0], pts[0][1]);
    for (const [px, py] of pts.slice(1)) ctx.lineTo(px, py);
    if (fp.kind === "Zone") ctx.closePath();
    ctx.stroke();
    if (fp.kind === "Arrow2D") {
      const [hx, hy] = pts[pts.length - 1];
      const [tx, ty] = pts[0];
      const ang = Math.atan2(hy - ty, hx - tx);
      ctx.beginPath();
      ctx.moveTo(hx, hy);
      ctx.lineTo(hx - 9 * Math.cos(ang - 0.4), hy - 9 * Math.sin(ang - 0.4));
      ctx.moveTo(hx, hy);
      ctx.lineTo(hx - 9 * Math.cos(ang + 0.4), hy - 9 * Math.sin(ang + 0.4));
      ctx.stroke();
    }
  }
}

/** Entity under the cursor, nearest first; radius in board fraction units. */
export function hitTest(
  scene: SceneState,
  u: number,
  v: number,
  radius = 0.02,
): string | null {
  let best: string | null = null;
  let bestD = radius;
  for (const ent of Object.values(scene.entities)) {
    const { point } = worldToBoard(ent.pose.x, ent.pose.y, scene.pitch);
    const d = Math.hypot(point.u - u, point.v - v);
    if (d < bestD) {
      bestD = d;
      best = ent.id;
    }
  }
  return best;
}

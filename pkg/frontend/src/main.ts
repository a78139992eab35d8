// App wiring: connect, render the board and the FPV preview, translate
// pointer gestures into commands. Tablet-first: pointer events only, large
// hit targets.

import { BoardRenderer, TOOLS, Tool, annotationCommand, canvasToBoard,
         dragReleaseCommand, hitTest, playbackCommand, playheadAt,
         setModeCommand } from "./board.js";
import { BoardClient } from "./client.js";
import { FpvRenderer, projectScene } from "./fpv.js";
import { badgeFor, DeviationReportDict, parseDeviationTsv } from "./review.js";
import { SceneState } from "./scene.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

const boardCanvas = el<HTMLCanvasElement>("board");
const fpvCanvas = el<HTMLCanvasElement>("fpv");
const toolbar = el<HTMLDivElement>("toolbar");
const modeBar = el<HTMLDivElement>("modes");
const playbackBar = el<HTMLDivElement>("playback");
const scrubber = el<HTMLInputElement>("scrubber");
const statusLine = el<HTMLSpanElement>("status");
const badges = el<HTMLDivElement>("badges");
const previewSelect = el<HTMLSelectElement>("preview-entity");

const boardCtx = boardCanvas.getContext("2d")!;
const fpvCtx = fpvCanvas.getContext("2d")!;
const renderer = new BoardRenderer(boardCtx, {
  width: boardCanvas.width,
  height: boardCanvas.height,
  margin: 24,
});
const fpvRenderer = new FpvRenderer(fpvCtx, fpvCanvas.width, fpvCanvas.height);

let currentTool: Tool = "Select";
let selected: string | null = null;
let dragging: string | null = null;
let pendingPoints: [number, number][] = [];
let reports: Map<string, DeviationReportDict> = new Map();

const params = new URLSearchParams(window.location.search);
const url = params.get("server") ?? `ws://${window.location.hostname || "localhost"}:8080`;

const client = new BoardClient({
  url,
  desiredRole: (params.get("role") as "Coach" | "Player" | "Observer") ?? "Coach",
  entityId: params.get("entity") ?? undefined,
  events: {
    onScene: redraw,
    onStatus: (s) => { statusLine.textContent = `${s} (${url})`; },
    onWelcome: (w) => {
      statusLine.textContent = `${w.role.role} @ ${url}`;
    },
    onReject: (r) => {
      statusLine.textContent = `rejected: ${r.reason} (${r.command_id})`;
      window.setTimeout(() => redraw(client.mirror.scene), 1500);
    },
  },
});

function redraw(scene: SceneState): void {
  renderer.render(scene, selected);
  refreshPreviewChoices(scene);
  const viewer = previewSelect.value;
  if (viewer && scene.entities[viewer] !== undefined) {
    fpvRenderer.render(projectScene(scene, viewer));
  }
  const playing = scene.playback?.state === "playing";
  if (scene.sequence !== null) {
    scrubber.max = String(sequenceDuration(scene));
    if (playing) scrubber.value = String(Math.round(playheadAt(scene, scene.version)));
    else scrubber.value = String(scene.playback?.playhead_ms ?? 0);
  }
  renderBadges(scene);
}

function sequenceDuration(scene: SceneState): number {
  let max = 0;
  for (const kfs of Object.values(scene.sequence?.tracks ?? {})) {
    max = Math.max(max, kfs[kfs.length - 1][0]);
  }
  return max;
}

function refreshPreviewChoices(scene: SceneState): void {
  const players = Object.values(scene.entities)
    .filter((e) => e.kind === "Player")
    .map((e) => e.id)
    .sort();
  const existing = Array.from(previewSelect.options).map((o) => o.value);
  if (JSON.stringify(existing) === JSON.stringify(players)) return;
  const kept = previewSelect.value;
  previewSelect.innerHTML = "";
  for (const id of players) {
    const opt = document.createElement("option");
    opt.value = id;
    opt.textContent = id;
    previewSelect.appendChild(opt);
  }
  if (players.includes(kept)) previewSelect.value = kept;
}

function renderBadges(scene: SceneState): void {
  badges.innerHTML = "";
  if (scene.mode !== "Review") return;
  for (const id of Object.keys(scene.entities).sort()) {
    if (scene.entities[id].kind !== "Player") continue;
    const badge = badgeFor(id, reports.get(id) ?? null);
    const div = document.createElement("div");
    div.className = `badge badge-${badge.state}`;
    div.textContent = `${id}: ${badge.label}`;
    badges.appendChild(div);
  }
}

// -- toolbar -----------------------------------------------------------------

for (const tool of TOOLS) {
  const btn = document.createElement("button");
  btn.textContent = tool;
  btn.onclick = () => {
    currentTool = tool;
    pendingPoints = [];
    for (const b of toolbar.querySelectorAll("button")) b.classList.remove("active");
    btn.classList.add("active");
  };
  if (tool === "Select") btn.classList.add("active");
  toolbar.appendChild(btn);
}

for (const mode of ["Lecture", "Rehearsal", "Review"] as const) {
  const btn = document.createElement("button");
  btn.textContent = mode;
  btn.onclick = () => client.sendCommand(setModeCommand(mode));
  modeBar.appendChild(btn);
}

for (const [label, action] of [["play", "play"], ["pause", "pause"], ["stop", "stop"]] as const) {
  const btn = document.createElement("button");
  btn.textContent = label;
  btn.onclick = () => client.sendCommand(playbackCommand(action, action === "play" ? { rate: 1.0 } : {}));
  playbackBar.appendChild(btn);
}
scrubber.oninput = () => {
  client.sendCommand(playbackCommand("seek", { positionMs: parseInt(scrubber.value, 10) }));
};

el<HTMLInputElement>("report-file").onchange = async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  reports = new Map(parseDeviationTsv(await file.text()).map((r) => [r.entity_id, r]));
  redraw(client.mirror.scene);
};

// -- pointer gestures ----------------------------------------------------------

boardCanvas.addEventListener("pointerdown", (ev) => {
  const rect = boardCanvas.getBoundingClientRect();
  const [u, v] = canvasToBoard(ev.clientX - rect.left, ev.clientY - rect.top, renderer.metrics);
  if (currentTool === "Select") {
    dragging = hitTest(client.mirror.scene, u, v);
    selected = dragging;
    redraw(client.mirror.scene);
    return;
  }
  pendingPoints.push([u, v]);
  if (currentTool === "Arrow2D" || currentTool === "Arrow3D") {
    if (pendingPoints.length === 2) finishAnnotation();
  } else if (currentTool === "Marker") {
    finishAnnotation();
  }
});

boardCanvas.addEventListener("dblclick", () => {
  if ((currentTool === "Polyline" && pendingPoints.length >= 2)
      || (currentTool === "Zone" && pendingPoints.length >= 3)) {
    finishAnnotation();
  }
});

boardCanvas.addEventListener("pointerup", (ev) => {
  if (dragging === null) return;
  const rect = boardCanvas.getBoundingClientRect();
  const [u, v] = canvasToBoard(ev.clientX - rect.left, ev.clientY - rect.top, renderer.metrics);
  client.sendCommand(dragReleaseCommand(dragging, u, v, client.mirror.scene.pitch));
  dragging = null;
});

function finishAnnotation(): void {
  if (currentTool === "Select") return;
  const text = currentTool === "Marker"
    ? window.prompt("marker text", "") ?? ""
    : "";
  client.sendCommand(annotationCommand(currentTool, pendingPoints,
                                       client.mirror.scene.pitch, { text }));
  pendingPoints = [];
}

previewSelect.onchange = () => redraw(client.mirror.scene);

client.connect();

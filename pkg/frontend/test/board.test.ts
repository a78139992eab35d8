// Board interactions: drag-release affine mapping, annotation builders,
// review badges, scrubber playhead derivation.

import { describe, expect, it } from "vitest";

import { annotationCommand, boardToCanvas, canvasToBoard, dragReleaseCommand,
         hitTest, playheadAt } from "../src/board.js";
import { badgeFor, parseDeviationTsv } from "../src/review.js";
import { boardToWorld, worldToBoard } from "../src/geometry.js";
import { initialScene } from "../src/scene.js";

const PITCH = { length_m: 105, width_m: 68 };

describe("drag release", () => {
  it("emits RetargetEntity with the exact affine coordinates", () => {
    const cmd = dragReleaseCommand("p7", 0.75, 0.25, PITCH);
    expect(cmd).toEqual({ kind: "RetargetEntity", id: "p7", target: [26.25, -17] });
  });

  it("corners and center map exactly", () => {
    expect(dragReleaseCommand("p", 0.5, 0.5, PITCH).target).toEqual([0, 0]);
    expect(dragReleaseCommand("p", 0, 0, PITCH).target).toEqual([-52.5, -34]);
    expect(dragReleaseCommand("p", 1, 1, PITCH).target).toEqual([52.5, 34]);
  });
});

describe("board transforms", () => {
  it("round trips board and world", () => {
    for (const [u, v] of [[0.1, 0.9], [0.33, 0.66], [0.5, 0.5]] as [number, number][]) {
      const [x, y] = boardToWorld({ u, v }, PITCH);
      const { point, outOfBounds } = worldToBoard(x, y, PITCH);
      expect(outOfBounds).toBe(false);
      expect(Math.abs(point.u - u)).toBeLessThan(1e-12);
      expect(Math.abs(point.v - v)).toBeLessThan(1e-12);
    }
  });

  it("clamps out-of-pitch points and flags them", () => {
    const { point, outOfBounds } = worldToBoard(60, 0, PITCH);
    expect(outOfBounds).toBe(true);
    expect(point).toEqual({ u: 1, v: 0.5 });
  });

  it("canvas mapping inverts (v axis flipped for screen space)", () => {
    const metrics = { width: 840, height: 600, margin: 24 };
    const [px, py] = boardToCanvas(0.25, 0.75, metrics);
    const [u, v] = canvasToBoard(px, py, metrics);
    expect(Math.abs(u - 0.25)).toBeLessThan(1e-12);
    expect(Math.abs(v - 0.75)).toBeLessThan(1e-12);
    const [, topY] = boardToCanvas(0.5, 1, metrics);
    const [, bottomY] = boardToCanvas(0.5, 0, metrics);
    expect(topY).toBeLessThan(bottomY);
  });
});

describe("annotation builders", () => {
  it("arrow3d gets a raised tip", () => {
    const cmd = annotationCommand("Arrow3D", [[0.5, 0.5], [0.75, 0.5]], PITCH,
                                  { apexHeightM: 2.5, id: "t1" });
    expect(cmd.kind).toBe("AddAnnotation");
    if (cmd.kind !== "AddAnnotation") return;
    expect(cmd.annotation.shape).toEqual({
      kind: "Arrow3D",
      start: [0, 0, 0],
      end: [26.25, 0, 2.5],
    });
  });

  it("marker keeps its text", () => {
    const cmd = annotationCommand("Marker", [[0, 0]], PITCH, { text: "corner", id: "t2" });
    if (cmd.kind !== "AddAnnotation") return;
    expect(cmd.annotation.shape).toEqual({
      kind: "Marker", point: [-52.5, -34], text: "corner",
    });
  });
});

describe("hit testing", () => {
  it("finds the nearest entity on the board", () => {
    const scene = initialScene();
    scene.entities["p1"] = {
      id: "p1", kind: "Player", team: "Home", label: "",
      pose: { x: 0, y: 0, z: 0, yaw: 0 },
      controller: { kind: "Coach" }, height_m: 1.8, speed_mps: 0,
    };
    expect(hitTest(scene, 0.5, 0.5)).toBe("p1");
    expect(hitTest(scene, 0.9, 0.9)).toBeNull();
  });
});

describe("playhead", () => {
  it("derives the playing position from the replicated anchor", () => {
    const scene = initialScene();
    scene.playback = { state: "playing", playhead_ms: 200, rate: 2, anchor_ms: 1000 };
    expect(playheadAt(scene, 1500)).toBe(1200);
    scene.playback = { state: "paused", playhead_ms: 700 };
    expect(playheadAt(scene, 99999)).toBe(700);
  });
});

describe("review badges", () => {
  const base = { entity_id: "p1", mean_m: 0, max_m: 0, rms_m: 0,
                 on_plan_fraction: 1, sample_count: 10 };

  it("green when on plan", () => {
    expect(badgeFor("p1", base).state).toBe("green");
    expect(badgeFor("p1", base).label).toBe("on plan");
  });

  it("amber between one half and nine tenths", () => {
    expect(badgeFor("p1", { ...base, on_plan_fraction: 0.5, max_m: 3 }).state).toBe("amber");
    expect(badgeFor("p1", { ...base, on_plan_fraction: 0.89, max_m: 3 }).state).toBe("amber");
    expect(badgeFor("p1", { ...base, on_plan_fraction: 0.9, max_m: 1 }).state).toBe("green");
  });

  it("red below one half, missing without data", () => {
    expect(badgeFor("p1", { ...base, on_plan_fraction: 0.4 }).state).toBe("red");
    expect(badgeFor("p3", null).state).toBe("missing");
  });

  it("parses the deviate command's delimited output", () => {
    const tsv = "entity\tmean_m\tmax_m\trms_m\ton_plan_fraction\tsample_count\n"
      + "p7\t2.000000\t3.000000\t2.236068\t0.5000\t2\n";
    const reports = parseDeviationTsv(tsv);
    expect(reports.length).toBe(1);
    expect(reports[0].entity_id).toBe("p7");
    expect(reports[0].rms_m).toBeCloseTo(Math.sqrt(5), 6);
    expect(badgeFor("p7", reports[0]).state).toBe("amber");
  });
});

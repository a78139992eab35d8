// Review-mode badges: quantified plan-vs-actual feedback per player.

export interface DeviationReportDict {
  entity_id: string;
  mean_m: number;
  max_m: number;
  rms_m: number;
  on_plan_fraction: number;
  sample_count: number;
}

export type BadgeState = "green" | "amber" | "red" | "missing";

export interface Badge {
  entityId: string;
  state: BadgeState;
  label: string;
}

export function badgeFor(entityId: string, report: DeviationReportDict | null): Badge {
  if (report === null || report.sample_count === 0) {
    return { entityId, state: "missing", label: "no data" };
  }
  const f = report.on_plan_fraction;
  const state: BadgeState = f >= 0.9 ? "green" : f >= 0.5 ? "amber" : "red";
  const label = f >= 0.9 && report.max_m === 0
    ? "on plan"
    : `${report.mean_m.toFixed(1)}/${report.max_m.toFixed(1)} m, ${(f * 100).toFixed(0)}% on plan`;
  return { entityId, state, label };
}

/** Parse the tab-delimited `deviate` report output into report dicts. */
export function parseDeviationTsv(text: string): DeviationReportDict[] {
  const lines = text.trim().split("\n").filter((ln) => ln.includes("\t"));
  if (lines.length === 0) return [];
  const header = lines[0].split("\t");
  const idx = (name: string) => header.indexOf(name);
  const out: DeviationReportDict[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split("\t");
    out.push({
      entity_id: cells[idx("entity")],
      mean_m: parseFloat(cells[idx("mean_m")]),
      max_m: parseFloat(cells[idx("max_m")]),
      rms_m: parseFloat(cells[idx("rms_m")]),
      on_plan_fraction: parseFloat(cells[idx("on_plan_fraction")]),
      sample_count: parseInt(cells[idx("sample_count")], 10),
    });
  }
  return out;
}

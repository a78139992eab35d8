"""Report figures rendered next to the delimited CLI output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Circle, Rectangle

from .motion import DeviationReport, Formation, TacticSequence, track_position
from .netsim import ConvergenceReport
from .scene import PitchSpec

PLANNED_COLOR = "#1f77b4"
ACTUAL_COLOR = "#d62728"
HOME_COLOR = "#1f77b4"
AWAY_COLOR = "#d62728"


def draw_pitch(ax, pitch: PitchSpec):
    half_l, half_w = pitch.length_m / 2, pitch.width_m / 2
    ax.add_patch(Rectangle((-half_l, -half_w), pitch.length_m, pitch.width_m,
                           fill=False, color="0.4", lw=1.2))
    ax.plot([0, 0], [-half_w, half_w], color="0.6", lw=0.8)
    ax.add_patch(Circle((0, 0), 9.15, fill=False, color="0.6", lw=0.8))
    ax.set_xlim(-half_l - 4, half_l + 4)
    ax.set_ylim(-half_w - 4, half_w + 4)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def deviation_figure(report: DeviationReport, planned: list[tuple[float, float, float]],
                     actual: list[tuple[float, float, float]], tau: float,
                     pitch: PitchSpec, out_path: str):
    """Planned vs recorded path on the pitch plus the per-sample error trace."""
    fig, (ax_pitch, ax_err) = plt.subplots(
        1, 2, figsize=(11, 4.5), gridspec_kw={"width_ratios": [3, 2]})
    draw_pitch(ax_pitch, pitch)
    ax_pitch.plot([p[1] for p in planned], [p[2] for p in planned],
                  color=PLANNED_COLOR, lw=2, label="planned")
    ax_pitch.plot([a[1] for a in actual], [a[2] for a in actual],
                  color=ACTUAL_COLOR, lw=1.2, marker="o", ms=3, label="actual")
    ax_pitch.legend(loc="upper right", fontsize=8)
    ax_pitch.set_title(f"{report.entity_id}: planned vs actual")

    ts = [a[0] / 1000.0 for a in actual]
    devs = []
    for t, x, y in actual:
        px, py = _planned_at(planned, t)
        devs.append(((x - px) ** 2 + (y - py) ** 2) ** 0.5)
    ax_err.plot(ts, devs, color=ACTUAL_COLOR, lw=1.2)
    ax_err.axhline(tau, color="0.4", ls="--", lw=0.8, label=f"tau = {tau} m")
    ax_err.set_xlabel("t [s]")
    ax_err.set_ylabel("deviation [m]")
    ax_err.set_title(f"mean {report.mean_m:.2f} m / max {report.max_m:.2f} m / "
                     f"on-plan {report.on_plan_fraction:.0%}")
    ax_err.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _planned_at(planned: list[tuple[float, float, float]], t: float):
    kfs = tuple((int(p[0]), p[1], p[2]) for p in planned)
    return track_position(kfs, t)


def transition_figure(seq: TacticSequence, start: Formation, goal: Formation,
                      pitch: PitchSpec, out_path: str):
    """Generated drill: one arrow per player, staggered starts annotated."""
    fig, ax = plt.subplots(figsize=(8, 5.5))
    draw_pitch(ax, pitch)
    team_of = {s.id: s.team for s in start.slots}
    for eid in sorted(seq.tracks):
        kfs = seq.tracks[eid]
        x0, y0 = kfs[0][1], kfs[0][2]
        x1, y1 = kfs[-1][1], kfs[-1][2]
        color = AWAY_COLOR if team_of.get(eid) == "Away" else HOME_COLOR
        if (x0, y0) != (x1, y1):
            ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                        arrowprops=dict(arrowstyle="->", color=color, lw=1.6))
        ax.plot([x0], [y0], "o", color=color, ms=7)
        delay = kfs[1][0] if len(kfs) == 3 else 0
        label = f"{eid}" + (f" +{delay}ms" if delay else "")
        ax.annotate(label, (x0, y0), textcoords="offset points",
                    xytext=(4, 4), fontsize=7)
    title = f"{seq.name}: {seq.duration_ms} ms"
    if seq.warnings:
        title += f"  ({len(seq.warnings)} unresolved crossing(s))"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def convergence_figure(report: ConvergenceReport, out_path: str,
                       last_command_ms: float | None = None):
    """Per-client applied version over simulated time (needs a trace)."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    by_client: dict[str, list[tuple[float, int]]] = {}
    for t, cid, version in report.trace:
        by_client.setdefault(cid, []).append((t, version))
    for cid in sorted(by_client):
        pts = by_client[cid]
        ax.step([p[0] / 1000.0 for p in pts], [p[1] for p in pts],
                where="post", lw=1.0, label=cid)
    if last_command_ms is not None:
        ax.axvline(last_command_ms / 1000.0, color="0.3", ls="--", lw=0.8,
                   label="last command")
    status = "converged" if report.converged else "did not converge"
    ttc = ("" if report.time_to_converge_ms is None
           else f" in {report.time_to_converge_ms:.0f} ms")
    ax.set_title(f"{status}{ttc}; {report.messages_dropped}/{report.messages_sent} "
                 "frames dropped")
    ax.set_xlabel("simulated time [s]")
    ax.set_ylabel("applied seq")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)

"""Time-parameterized movement: retarget plans, keyframed sequences,
assignment-optimal formation transitions, and plan-vs-actual deviation.

Everything here is pure math over plain tuples; poses are assembled by the
scene/session layers.  Ground points are world meters, times are session ms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

from .hungarian import optimal_assignment

T_MIN_MS = 300
T_MAX_MS = 5000
DEFAULT_V_MAX = 8.0
ANTICIPATION_LECTURE_MS = 500
COLLISION_DELAY_STEP_MS = 300
COLLISION_MAX_ATTEMPTS = 5

EASINGS = ("Linear", "Smoothstep")

Point = tuple[float, float]
Keyframe = tuple[int, float, float]  # (t_ms, x, y)


class CountMismatch(ValueError):
    pass


class EmptyActual(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class MotionPlan:
    entity_id: str
    origin: Point
    target: Point
    start_ms: int
    duration_ms: int
    anticipation_ms: int = 0
    easing: str = "Smoothstep"

    def __post_init__(self):
        if not (T_MIN_MS <= self.duration_ms <= T_MAX_MS):
            raise ValueError(f"duration_ms {self.duration_ms} outside [{T_MIN_MS}, {T_MAX_MS}]")
        if self.anticipation_ms < 0:
            raise ValueError("anticipation_ms must be >= 0")
        if self.easing not in EASINGS:
            raise ValueError(f"unknown easing {self.easing!r}")

    @property
    def end_ms(self) -> int:
        return self.start_ms + self.duration_ms


@dataclass(frozen=True, slots=True)
class TransitionWarning:
    a: str
    b: str
    min_distance_m: float
    t_ms: int

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b,
                "min_distance_m": self.min_distance_m, "t_ms": self.t_ms}


@dataclass(frozen=True)
class TacticSequence:
    id: str
    name: str
    tracks: dict[str, tuple[Keyframe, ...]]
    warnings: tuple[TransitionWarning, ...] = ()

    def __post_init__(self):
        for eid, kfs in self.tracks.items():
            if not kfs:
                raise ValueError(f"track {eid!r} has no keyframes")
            if kfs[0][0] != 0:
                raise ValueError(f"track {eid!r} must start at t=0")
            for a, b in zip(kfs, kfs[1:]):
                if b[0] <= a[0]:
                    raise ValueError(f"track {eid!r} keyframe times must strictly increase")

    @property
    def duration_ms(self) -> int:
        return max((kfs[-1][0] for kfs in self.tracks.values()), default=0)


@dataclass(frozen=True, slots=True)
class DeviationReport:
    entity_id: str
    mean_m: float
    max_m: float
    rms_m: float
    on_plan_fraction: float
    sample_count: int

    def to_dict(self) -> dict:
        return {"entity_id": self.entity_id, "mean_m": self.mean_m, "max_m": self.max_m,
                "rms_m": self.rms_m, "on_plan_fraction": self.on_plan_fraction,
                "sample_count": self.sample_count}


class MotionSample(NamedTuple):
    x: float
    y: float
    yaw: float
    speed_mps: float


def clamp_duration_ms(ms: float) -> int:
    return int(min(T_MAX_MS, max(T_MIN_MS, round(ms))))


def retarget(origin: Point, target: Point, v_max: float, now_ms: int, mode: str,
             entity_id: str = "") -> MotionPlan:
    """Speed-clamped smooth repositioning; in Lecture mode the plan starts
    after a lead-in so watching players see the cue before motion begins."""
    if v_max <= 0:
        raise ValueError("v_max must be > 0")
    dist = math.dist(origin, target)
    duration = clamp_duration_ms(dist / v_max * 1000.0)
    anticipation = ANTICIPATION_LECTURE_MS if mode == "Lecture" else 0
    return MotionPlan(entity_id=entity_id, origin=origin, target=target,
                      start_ms=now_ms + anticipation, duration_ms=duration,
                      anticipation_ms=anticipation, easing="Smoothstep")


def sample_motion(plan: MotionPlan, t_ms: float, rest_yaw: float = 0.0) -> MotionSample:
    """Position/facing/speed along a plan.  Before start holds the origin,
    after the end holds the target; zero-length plans keep rest_yaw."""
    ox, oy = plan.origin
    tx, ty = plan.target
    dx, dy = tx - ox, ty - oy
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return MotionSample(ox, oy, rest_yaw, 0.0)
    heading = math.atan2(dy, dx)
    if t_ms < plan.start_ms:
        return MotionSample(ox, oy, rest_yaw, 0.0)
    if t_ms >= plan.end_ms:
        return MotionSample(tx, ty, heading, 0.0)
    s = (t_ms - plan.start_ms) / plan.duration_ms
    if plan.easing == "Linear":
        w, dw = s, 1.0
    else:
        w, dw = s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)
    speed = dw * dist / (plan.duration_ms / 1000.0)
    return MotionSample(ox + w * dx, oy + w * dy, heading, speed)


def _track_state(kfs: tuple[Keyframe, ...], t_ms: float) -> MotionSample:
    first, last = kfs[0], kfs[-1]
    if len(kfs) == 1:
        return MotionSample(first[1], first[2], 0.0, 0.0)
    if t_ms <= first[0]:
        seg = _segment_heading(kfs, 0)
        return MotionSample(first[1], first[2], seg, 0.0)
    if t_ms >= last[0]:
        seg = _segment_heading(kfs, len(kfs) - 2)
        return MotionSample(last[1], last[2], seg, 0.0)
    lo = 0
    for i in range(len(kfs) - 1):
        if kfs[i][0] <= t_ms < kfs[i + 1][0]:
            lo = i
            break
    t0, x0, y0 = kfs[lo]
    t1, x1, y1 = kfs[lo + 1]
    w = (t_ms - t0) / (t1 - t0)
    seg_len = math.hypot(x1 - x0, y1 - y0)
    speed = seg_len / ((t1 - t0) / 1000.0)
    return MotionSample(x0 + w * (x1 - x0), y0 + w * (y1 - y0),
                        _segment_heading(kfs, lo), speed)


def _segment_heading(kfs: tuple[Keyframe, ...], i: int) -> float:
    """Facing along segment i; degenerate segments fall back to the nearest
    moving segment (scanning back, then forward), else 0."""
    for j in range(i, -1, -1):
        dx = kfs[j + 1][1] - kfs[j][1]
        dy = kfs[j + 1][2] - kfs[j][2]
        if dx or dy:
            return math.atan2(dy, dx)
    for j in range(i + 1, len(kfs) - 1):
        dx = kfs[j + 1][1] - kfs[j][1]
        dy = kfs[j + 1][2] - kfs[j][2]
        if dx or dy:
            return math.atan2(dy, dx)
    return 0.0


def sample_sequence(seq: TacticSequence, t_ms: float) -> dict[str, MotionSample]:
    """Per-track linear interpolation, holding the first/last keyframes
    outside the track's time range."""
    if t_ms < 0:
        raise ValueError("t_ms must be >= 0")
    return {eid: _track_state(kfs, t_ms) for eid, kfs in seq.tracks.items()}


def track_position(kfs: tuple[Keyframe, ...], t_ms: float) -> Point:
    s = _track_state(tuple(kfs), t_ms)
    return (s.x, s.y)


# -- formation transitions ---------------------------------------------------

@dataclass(frozen=True, slots=True)
class FormationSlot:
    id: str
    x: float
    y: float
    label: str = ""
    team: str | None = None


@dataclass(frozen=True)
class Formation:
    slots: tuple[FormationSlot, ...]

    def __post_init__(self):
        ids = [s.id for s in self.slots]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate slot ids in formation")


def _pair_min_distance(a: tuple[Keyframe, ...], b: tuple[Keyframe, ...]) -> tuple[float, float]:
    """Closest approach of two piecewise-linear tracks: (distance, t_ms).

    Both motions are affine between breakpoints, so the squared separation is
    quadratic on each interval and the minimum is closed-form.
    """
    times = sorted({kf[0] for kf in a} | {kf[0] for kf in b})
    if len(times) == 1:
        times = times * 2
    best_d = math.inf
    best_t = times[0]
    for t0, t1 in zip(times, times[1:]):
        if t1 == t0:
            continue
        ax0, ay0 = track_position(a, t0)
        ax1, ay1 = track_position(a, t1)
        bx0, by0 = track_position(b, t0)
        bx1, by1 = track_position(b, t1)
        rx, ry = ax0 - bx0, ay0 - by0
        vx = (ax1 - ax0 - bx1 + bx0) / (t1 - t0)
        vy = (ay1 - ay0 - by1 + by0) / (t1 - t0)
        vv = vx * vx + vy * vy
        if vv > 0:
            t_star = t0 - (rx * vx + ry * vy) / vv
            t_star = min(t1, max(t0, t_star))
        else:
            t_star = t0
        for t in (t0, t_star, t1):
            dt = t - t0
            d = math.hypot(rx + vx * dt, ry + vy * dt)
            if d < best_d:
                best_d = d
                best_t = t
    return best_d, best_t


def generate_transition(start: Formation, goal: Formation, v_max: float = DEFAULT_V_MAX,
                        r_min: float = 0.0, pitch: tuple[float, float] | None = None,
                        sequence_id: str = "transition", name: str = "") -> TacticSequence:
    """Straight-line drill moving every player to its team's best-matching
    goal slot (minimum total running distance), with crossing paths staggered
    by delay steps when they would pass within r_min of each other.
    """
    if pitch is not None:
        half_l, half_w = pitch[0] / 2.0, pitch[1] / 2.0
        for f in (start, goal):
            for s in f.slots:
                if abs(s.x) > half_l or abs(s.y) > half_w:
                    raise ValueError(f"slot {s.id!r} at ({s.x}, {s.y}) is outside the pitch")

    by_team_start: dict[str | None, list[FormationSlot]] = {}
    by_team_goal: dict[str | None, list[FormationSlot]] = {}
    for s in start.slots:
        by_team_start.setdefault(s.team, []).append(s)
    for s in goal.slots:
        by_team_goal.setdefault(s.team, []).append(s)
    if set(by_team_start) != set(by_team_goal):
        raise CountMismatch("formations have different team groups")

    moves: dict[str, tuple[Point, Point, float]] = {}
    for team in sorted(by_team_start, key=lambda t: (t is None, t)):
        src = sorted(by_team_start[team], key=lambda s: s.id)
        dst = sorted(by_team_goal[team], key=lambda s: s.id)
        if len(src) != len(dst):
            raise CountMismatch(
                f"team {team!r}: {len(src)} players vs {len(dst)} target slots")
        cost = [[math.dist((p.x, p.y), (q.x, q.y)) for q in dst] for p in src]
        sigma = optimal_assignment(cost)
        for i, p in enumerate(src):
            q = dst[sigma[i]]
            moves[p.id] = ((p.x, p.y), (q.x, q.y), cost[i][sigma[i]])

    if v_max <= 0:
        raise ValueError("v_max must be > 0")
    max_dist = max((d for _, _, d in moves.values()), default=0.0)
    t_common = clamp_duration_ms(max_dist / v_max * 1000.0)

    delays: dict[str, int] = {eid: 0 for eid in moves}

    def build_tracks() -> dict[str, tuple[Keyframe, ...]]:
        tracks = {}
        for eid, (origin, target, _) in moves.items():
            d = delays[eid]
            if d:
                tracks[eid] = ((0, origin[0], origin[1]),
                               (d, origin[0], origin[1]),
                               (d + t_common, target[0], target[1]))
            else:
                tracks[eid] = ((0, origin[0], origin[1]),
                               (t_common, target[0], target[1]))
        return tracks

    ids = sorted(moves)
    pairs = [(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]]
    attempts: dict[tuple[str, str], int] = {}
    while True:
        tracks = build_tracks()
        actionable = None
        for pair in pairs:
            a, b = pair
            if moves[a][2] == 0.0 and moves[b][2] == 0.0:
                continue  # both stationary: placement, not a crossing
            d, _ = _pair_min_distance(tracks[a], tracks[b])
            if d < r_min and attempts.get(pair, 0) < COLLISION_MAX_ATTEMPTS:
                actionable = pair
                break
        if actionable is None:
            break
        a, b = actionable
        victim = a if (moves[a][2], a) <= (moves[b][2], b) else b
        delays[victim] += COLLISION_DELAY_STEP_MS
        attempts[actionable] = attempts.get(actionable, 0) + 1

    tracks = build_tracks()
    warnings = []
    for a, b in pairs:
        if moves[a][2] == 0.0 and moves[b][2] == 0.0:
            continue
        d, t = _pair_min_distance(tracks[a], tracks[b])
        if d < r_min:
            warnings.append(TransitionWarning(a, b, d, int(round(t))))
    return TacticSequence(id=sequence_id, name=name or sequence_id,
                          tracks=tracks, warnings=tuple(warnings))


# -- deviation ---------------------------------------------------------------

Planned = Union[MotionPlan, TacticSequence, tuple, list]


def path_deviation(planned: Planned, actual: list[tuple[float, float, float]],
                   tau: float, entity_id: str = "") -> DeviationReport:
    """Pointwise distance between the planned position and recorded samples
    (t_ms, x, y).  on_plan_fraction counts samples strictly within tau."""
    if not actual:
        raise EmptyActual("need at least one actual sample")
    for (ta, _, _), (tb, _, _) in zip(actual, actual[1:]):
        if tb < ta:
            raise ValueError("actual timestamps must be nondecreasing")

    if isinstance(planned, MotionPlan):
        eid = entity_id or planned.entity_id

        def pos(t: float) -> Point:
            s = sample_motion(planned, t)
            return (s.x, s.y)
    elif isinstance(planned, TacticSequence):
        if entity_id not in planned.tracks:
            raise KeyError(f"no track for entity {entity_id!r}")
        kfs = planned.tracks[entity_id]
        eid = entity_id

        def pos(t: float) -> Point:
            return track_position(kfs, t)
    else:
        kfs = tuple(tuple(kf) for kf in planned)
        eid = entity_id

        def pos(t: float) -> Point:
            return track_position(kfs, t)

    devs = []
    for t, x, y in actual:
        px, py = pos(t)
        devs.append(math.hypot(x - px, y - py))
    n = len(devs)
    mean = sum(devs) / n
    rms = math.sqrt(sum(d * d for d in devs) / n)
    within = sum(1 for d in devs if d < tau)
    return DeviationReport(entity_id=eid, mean_m=mean, max_m=max(devs), rms_m=rms,
                           on_plan_fraction=within / n, sample_count=n)


# -- file formats (board coordinates for portability) ------------------------

def formation_to_json(formation: Formation, pitch: tuple[float, float]) -> str:
    length, width = pitch
    players = [{"id": s.id, "label": s.label, "team": s.team,
                "u": s.x / length + 0.5, "v": s.y / width + 0.5}
               for s in formation.slots]
    return json.dumps({"pitch": {"length_m": length, "width_m": width},
                       "players": players}, indent=2, sort_keys=True)


def formation_from_json(text: str) -> tuple[Formation, tuple[float, float]]:
    obj = json.loads(text)
    length = float(obj["pitch"]["length_m"])
    width = float(obj["pitch"]["width_m"])
    slots = tuple(FormationSlot(id=p["id"], label=p.get("label", ""),
                                team=p.get("team"),
                                x=(float(p["u"]) - 0.5) * length,
                                y=(float(p["v"]) - 0.5) * width)
                  for p in obj["players"])
    return Formation(slots), (length, width)


def sequence_to_json(seq: TacticSequence, pitch: tuple[float, float]) -> str:
    length, width = pitch
    tracks = {eid: [[t, x / length + 0.5, y / width + 0.5] for t, x, y in kfs]
              for eid, kfs in seq.tracks.items()}
    return json.dumps({"id": seq.id, "name": seq.name, "tracks": tracks,
                       "warnings": [w.to_dict() for w in seq.warnings],
                       "pitch": {"length_m": length, "width_m": width}},
                      indent=2, sort_keys=True)


def sequence_from_json(text: str, pitch: tuple[float, float] | None = None) -> TacticSequence:
    obj = json.loads(text)
    if pitch is None:
        length = float(obj["pitch"]["length_m"])
        width = float(obj["pitch"]["width_m"])
    else:
        length, width = pitch
    tracks = {eid: tuple((int(t), (float(u) - 0.5) * length, (float(v) - 0.5) * width)
                         for t, u, v in kfs)
              for eid, kfs in obj["tracks"].items()}
    warnings = tuple(TransitionWarning(w["a"], w["b"], float(w["min_distance_m"]),
                                       int(w["t_ms"]))
                     for w in obj.get("warnings", []))
    return TacticSequence(id=obj["id"], name=obj.get("name", obj["id"]),
                          tracks=tracks, warnings=warnings)

"""Authoritative tactic-scene model.

A scene is an immutable value: entities, annotations, mode, active motion
plans, the loaded sequence and its playback state, plus a version counter.
Mutation happens only through commands (coach/player intents) that the
server turns into totally ordered deltas; clients rebuild the same scene by
applying those deltas in order.  Convergence and replay are checked with a
canonical 64-bit digest over a normalized serialization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Union

from . import motion
from .motion import MotionPlan, TacticSequence, TransitionWarning

DEFAULT_PITCH_LENGTH_M = 105.0
DEFAULT_PITCH_WIDTH_M = 68.0
ANNOTATION_MARGIN_M = 5.0

MODES = ("Lecture", "Rehearsal", "Review")
ENTITY_KINDS = ("Player", "Ball", "Cone")
TEAMS = ("Home", "Away")

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


class SceneError(Exception):
    """Base for command-application failures; subclass names double as
    wire-level Reject reasons."""


class UnknownEntity(SceneError):
    pass


class DuplicateId(SceneError):
    pass


class InvalidGeometry(SceneError):
    pass


class NoSequenceLoaded(SceneError):
    pass


class SequenceGap(Exception):
    """Delta seq is ahead of the local version; a snapshot is required."""


def _require_finite(name: str, *values: float):
    for v in values:
        if not math.isfinite(v):
            raise InvalidGeometry(f"{name} has non-finite component {v!r}")


@dataclass(frozen=True, slots=True)
class PitchSpec:
    length_m: float = DEFAULT_PITCH_LENGTH_M
    width_m: float = DEFAULT_PITCH_WIDTH_M

    def __post_init__(self):
        if not (self.length_m > 0 and self.width_m > 0):
            raise InvalidGeometry("pitch dimensions must be positive")


def normalize_yaw(yaw: float) -> float:
    """Wrap into [-pi, pi)."""
    y = math.fmod(yaw + math.pi, 2.0 * math.pi)
    if y < 0:
        y += 2.0 * math.pi
    return y - math.pi


@dataclass(frozen=True, slots=True)
class Pose:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        _require_finite("pose", self.x, self.y, self.z, self.yaw)
        if self.z < 0:
            raise InvalidGeometry(f"pose z must be >= 0, got {self.z}")
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))


@dataclass(frozen=True, slots=True)
class Entity:
    id: str
    kind: str = "Player"
    team: Optional[str] = None
    label: str = ""
    pose: Pose = Pose()
    controller: Optional[str] = None  # None = coach-controlled, else client id
    height_m: float = 1.8
    speed_mps: float = 0.0

    def __post_init__(self):
        if self.kind not in ENTITY_KINDS:
            raise InvalidGeometry(f"unknown entity kind {self.kind!r}")
        if self.team is not None and self.team not in TEAMS:
            raise InvalidGeometry(f"unknown team {self.team!r}")
        if self.kind in ("Ball", "Cone") and self.controller is not None:
            raise InvalidGeometry(f"{self.kind} entities are coach-controlled")
        if self.kind == "Player" and not self.height_m > 0:
            raise InvalidGeometry("player height_m must be > 0")


# -- annotation shapes --------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Polyline:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise InvalidGeometry("polyline needs at least 2 points")


@dataclass(frozen=True, slots=True)
class Arrow2D:
    start: tuple[float, float]
    end: tuple[float, float]


@dataclass(frozen=True, slots=True)
class Arrow3D:
    start: tuple[float, float, float]
    end: tuple[float, float, float]


@dataclass(frozen=True, slots=True)
class Zone:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 3:
            raise InvalidGeometry("zone polygon needs at least 3 vertices")


@dataclass(frozen=True, slots=True)
class Marker:
    point: tuple[float, float]
    text: str = ""


Shape = Union[Polyline, Arrow2D, Arrow3D, Zone, Marker]


@dataclass(frozen=True, slots=True)
class Annotation:
    id: str
    shape: Shape
    priority: int = 0
    created_at: int = 0
    author: str = ""

    def __post_init__(self):
        if self.priority < 0:
            raise InvalidGeometry("priority must be >= 0")


def shape_ground_points(shape: Shape) -> list[tuple[float, float]]:
    """Vertices projected onto the ground plane (z dropped)."""
    if isinstance(shape, (Polyline, Zone)):
        return [(x, y) for x, y in shape.points]
    if isinstance(shape, Arrow2D):
        return [shape.start, shape.end]
    if isinstance(shape, Arrow3D):
        return [(shape.start[0], shape.start[1]), (shape.end[0], shape.end[1])]
    return [shape.point]


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r) -> bool:
    return (min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
            and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))


def _segments_cross(a, b, c, d) -> bool:
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if ((o1 > 0) != (o2 > 0) and o1 != 0 and o2 != 0
            and (o3 > 0) != (o4 > 0) and o3 != 0 and o4 != 0):
        return True
    if o1 == 0 and _on_segment(a, b, c):
        return True
    if o2 == 0 and _on_segment(a, b, d):
        return True
    if o3 == 0 and _on_segment(c, d, a):
        return True
    if o4 == 0 and _on_segment(c, d, b):
        return True
    return False


def _point_on_segment(a, b, p) -> bool:
    return _orient(a, b, p) == 0 and _on_segment(a, b, p)


def is_simple_polygon(points) -> bool:
    """No two non-adjacent edges touch; adjacent edges meet only at their
    shared vertex."""
    n = len(points)
    if n < 3:
        return False
    for i in range(n):
        if points[i] == points[(i + 1) % n]:
            return False  # degenerate zero-length edge
    for i in range(n):
        a, b = points[i], points[(i + 1) % n]
        for j in range(i + 1, n):
            c, d = points[j], points[(j + 1) % n]
            if j == i + 1:  # share vertex b == c
                if _point_on_segment(a, b, d) or _point_on_segment(c, d, a):
                    return False
            elif i == 0 and j == n - 1:  # share vertex a == d
                if _point_on_segment(a, b, c) or _point_on_segment(c, d, b):
                    return False
            elif _segments_cross(a, b, c, d):
                return False
    return True


def validate_annotation(a: Annotation, pitch: PitchSpec):
    half_l = pitch.length_m / 2.0 + ANNOTATION_MARGIN_M
    half_w = pitch.width_m / 2.0 + ANNOTATION_MARGIN_M
    for x, y in shape_ground_points(a.shape):
        _require_finite("annotation", x, y)
        if abs(x) > half_l or abs(y) > half_w:
            raise InvalidGeometry(
                f"annotation {a.id!r} point ({x}, {y}) outside pitch bounds + margin")
    if isinstance(a.shape, Arrow3D):
        for p in (a.shape.start, a.shape.end):
            _require_finite("annotation", *p)
            if p[2] < 0:
                raise InvalidGeometry("arrow endpoint below ground")
    if isinstance(a.shape, Zone) and not is_simple_polygon(a.shape.points):
        raise InvalidGeometry(f"zone {a.id!r} polygon is self-intersecting")


# -- playback -----------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Playback:
    state: str = "stopped"  # stopped | paused | playing
    playhead_ms: int = 0
    rate: Optional[float] = None
    anchor_ms: Optional[int] = None  # session time the playhead was anchored at

    def __post_init__(self):
        if self.state not in ("stopped", "paused", "playing"):
            raise ValueError(f"bad playback state {self.state!r}")
        if self.state == "playing" and (self.rate is None or self.anchor_ms is None):
            raise ValueError("playing state requires rate and anchor_ms")

    def position_at(self, now_ms: int) -> float:
        if self.state != "playing":
            return float(self.playhead_ms)
        return self.playhead_ms + (now_ms - self.anchor_ms) * self.rate


# -- commands -----------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class SpawnEntity:
    entity: Entity


@dataclass(frozen=True, slots=True)
class RemoveEntity:
    id: str


@dataclass(frozen=True, slots=True)
class TeleportEntity:
    id: str
    pose: Pose


@dataclass(frozen=True, slots=True)
class RetargetEntity:
    id: str
    target: tuple[float, float]


@dataclass(frozen=True, slots=True)
class AddAnnotation:
    annotation: Annotation


@dataclass(frozen=True, slots=True)
class RemoveAnnotation:
    id: str


@dataclass(frozen=True, slots=True)
class SetMode:
    mode: str


@dataclass(frozen=True, slots=True)
class LoadSequence:
    sequence: TacticSequence


@dataclass(frozen=True, slots=True)
class PlaybackControl:
    action: str  # play | pause | seek | stop
    rate: Optional[float] = None
    position_ms: Optional[int] = None


@dataclass(frozen=True, slots=True)
class PlayerPose:
    id: str
    pose: Pose


CommandBody = Union[SpawnEntity, RemoveEntity, TeleportEntity, RetargetEntity,
                    AddAnnotation, RemoveAnnotation, SetMode, LoadSequence,
                    PlaybackControl, PlayerPose]


@dataclass(frozen=True, slots=True)
class Command:
    command_id: str
    issuer: str
    body: CommandBody


# -- delta effects ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class EntityUpsert:
    entity: Entity


@dataclass(frozen=True, slots=True)
class EntityRemove:
    id: str


@dataclass(frozen=True, slots=True)
class AnnotationUpsert:
    annotation: Annotation


@dataclass(frozen=True, slots=True)
class AnnotationRemove:
    id: str


@dataclass(frozen=True, slots=True)
class ModeChange:
    mode: str


@dataclass(frozen=True, slots=True)
class PlanStart:
    plan: MotionPlan


@dataclass(frozen=True, slots=True)
class PlanEnd:
    entity_id: str


@dataclass(frozen=True, slots=True)
class SequenceLoad:
    sequence: TacticSequence


@dataclass(frozen=True, slots=True)
class PlaybackChange:
    playback: Playback


@dataclass(frozen=True, slots=True)
class PoseUpdate:
    id: str
    pose: Pose
    cancel_plan: bool = False
    speed_mps: Optional[float] = None


Effect = Union[EntityUpsert, EntityRemove, AnnotationUpsert, AnnotationRemove,
               ModeChange, PlanStart, PlanEnd, SequenceLoad, PlaybackChange,
               PoseUpdate]


@dataclass(frozen=True, slots=True)
class StateDelta:
    seq: int
    session_time_ms: int
    effect: Effect


# -- the scene ----------------------------------------------------------------

@dataclass(frozen=True)
class TacticScene:
    pitch: PitchSpec = PitchSpec()
    entities: dict[str, Entity] = field(default_factory=dict)
    annotations: dict[str, Annotation] = field(default_factory=dict)
    mode: str = "Lecture"
    active_plans: dict[str, MotionPlan] = field(default_factory=dict)
    sequence: Optional[TacticSequence] = None
    playback: Optional[Playback] = None
    version: int = 0
    # idempotency bookkeeping: (issuer, command_id) -> original delta.
    # Server-side only; never serialized or hashed.
    seen: dict[tuple[str, str], StateDelta] = field(
        default_factory=dict, compare=False, repr=False)


def initial_scene(pitch: Optional[PitchSpec] = None) -> TacticScene:
    return TacticScene(pitch=pitch or PitchSpec())


def _mutate(scene: TacticScene, effect: Effect, new_version: int) -> TacticScene:
    if isinstance(effect, EntityUpsert):
        entities = dict(scene.entities)
        entities[effect.entity.id] = effect.entity
        return replace(scene, entities=entities, version=new_version)
    if isinstance(effect, EntityRemove):
        entities = dict(scene.entities)
        entities.pop(effect.id, None)
        plans = scene.active_plans
        if effect.id in plans:
            plans = dict(plans)
            plans.pop(effect.id)
        return replace(scene, entities=entities, active_plans=plans,
                       version=new_version)
    if isinstance(effect, AnnotationUpsert):
        annotations = dict(scene.annotations)
        annotations[effect.annotation.id] = effect.annotation
        return replace(scene, annotations=annotations, version=new_version)
    if isinstance(effect, AnnotationRemove):
        annotations = dict(scene.annotations)
        annotations.pop(effect.id, None)
        return replace(scene, annotations=annotations, version=new_version)
    if isinstance(effect, ModeChange):
        return replace(scene, mode=effect.mode, version=new_version)
    if isinstance(effect, PlanStart):
        plans = dict(scene.active_plans)
        plans[effect.plan.entity_id] = effect.plan
        return replace(scene, active_plans=plans, version=new_version)
    if isinstance(effect, PlanEnd):
        plans = dict(scene.active_plans)
        plans.pop(effect.entity_id, None)
        return replace(scene, active_plans=plans, version=new_version)
    if isinstance(effect, SequenceLoad):
        return replace(scene, sequence=effect.sequence, playback=Playback(),
                       version=new_version)
    if isinstance(effect, PlaybackChange):
        return replace(scene, playback=effect.playback, version=new_version)
    if isinstance(effect, PoseUpdate):
        ent = scene.entities.get(effect.id)
        if ent is None:
            return replace(scene, version=new_version)
        speed = ent.speed_mps if effect.speed_mps is None else effect.speed_mps
        entities = dict(scene.entities)
        entities[effect.id] = replace(ent, pose=effect.pose, speed_mps=speed)
        plans = scene.active_plans
        if effect.cancel_plan and effect.id in plans:
            plans = dict(plans)
            plans.pop(effect.id)
        return replace(scene, entities=entities, active_plans=plans,
                       version=new_version)
    raise TypeError(f"unknown effect {effect!r}")


def apply_effect(scene: TacticScene, effect: Effect,
                 now_ms: int) -> tuple[TacticScene, StateDelta]:
    """Server-side primitive: stamp the next delta and apply it."""
    delta = StateDelta(seq=scene.version + 1, session_time_ms=now_ms, effect=effect)
    return _mutate(scene, effect, delta.seq), delta


def _effect_for(scene: TacticScene, body: CommandBody, issuer: str,
                now_ms: int, v_max: float) -> Effect:
    if isinstance(body, SpawnEntity):
        if body.entity.id in scene.entities:
            raise DuplicateId(f"entity {body.entity.id!r} already exists")
        return EntityUpsert(body.entity)
    if isinstance(body, RemoveEntity):
        if body.id not in scene.entities:
            raise UnknownEntity(f"no entity {body.id!r}")
        return EntityRemove(body.id)
    if isinstance(body, TeleportEntity):
        if body.id not in scene.entities:
            raise UnknownEntity(f"no entity {body.id!r}")
        return PoseUpdate(body.id, body.pose, cancel_plan=True, speed_mps=0.0)
    if isinstance(body, RetargetEntity):
        ent = scene.entities.get(body.id)
        if ent is None:
            raise UnknownEntity(f"no entity {body.id!r}")
        _require_finite("retarget target", *body.target)
        plan = motion.retarget((ent.pose.x, ent.pose.y), tuple(body.target),
                               v_max, now_ms, scene.mode, entity_id=body.id)
        return PlanStart(plan)
    if isinstance(body, AddAnnotation):
        if body.annotation.id in scene.annotations:
            raise DuplicateId(f"annotation {body.annotation.id!r} already exists")
        stamped = replace(body.annotation, created_at=now_ms, author=issuer)
        validate_annotation(stamped, scene.pitch)
        return AnnotationUpsert(stamped)
    if isinstance(body, RemoveAnnotation):
        if body.id not in scene.annotations:
            raise UnknownEntity(f"no annotation {body.id!r}")
        return AnnotationRemove(body.id)
    if isinstance(body, SetMode):
        if body.mode not in MODES:
            raise InvalidGeometry(f"unknown mode {body.mode!r}")
        return ModeChange(body.mode)
    if isinstance(body, LoadSequence):
        return SequenceLoad(body.sequence)
    if isinstance(body, PlaybackControl):
        if scene.sequence is None:
            raise NoSequenceLoaded("no sequence loaded")
        pb = scene.playback or Playback()
        duration = scene.sequence.duration_ms
        if body.action == "play":
            rate = body.rate if body.rate is not None else 1.0
            if rate <= 0:
                raise InvalidGeometry("playback rate must be > 0")
            head = int(round(pb.position_at(now_ms)))
            if head >= duration:
                head = 0  # replay from the top once the clip has finished
            return PlaybackChange(Playback("playing", head, rate, now_ms))
        if body.action == "pause":
            head = int(round(pb.position_at(now_ms)))
            return PlaybackChange(Playback("paused", min(head, duration)))
        if body.action == "seek":
            if body.position_ms is None:
                raise InvalidGeometry("seek requires position_ms")
            head = max(0, min(int(body.position_ms), duration))
            if pb.state == "playing":
                return PlaybackChange(Playback("playing", head, pb.rate, now_ms))
            return PlaybackChange(Playback(pb.state, head))
        if body.action == "stop":
            return PlaybackChange(Playback("stopped", 0))
        raise InvalidGeometry(f"unknown playback action {body.action!r}")
    if isinstance(body, PlayerPose):
        if body.id not in scene.entities:
            raise UnknownEntity(f"no entity {body.id!r}")
        return PoseUpdate(body.id, body.pose, cancel_plan=True)
    raise TypeError(f"unknown command body {body!r}")


def apply_command(scene: TacticScene, cmd: Command, now_ms: int, *,
                  v_max: float = motion.DEFAULT_V_MAX) -> tuple[TacticScene, StateDelta]:
    """Turn an authority-checked command into the next delta and apply it.

    A repeated (issuer, command_id) is a no-op that returns the original
    delta, so client retries cannot double-apply.  PlayerPose skips that
    bookkeeping: it is idempotent by latest-wins.
    """
    ephemeral = isinstance(cmd.body, PlayerPose)
    key = (cmd.issuer, cmd.command_id)
    if not ephemeral and key in scene.seen:
        return scene, scene.seen[key]
    effect = _effect_for(scene, cmd.body, cmd.issuer, now_ms, v_max)
    new_scene, delta = apply_effect(scene, effect, now_ms)
    if not ephemeral:
        seen = dict(scene.seen)
        seen[key] = delta
        new_scene = replace(new_scene, seen=seen)
    return new_scene, delta


def apply_delta(scene: TacticScene, delta: StateDelta) -> TacticScene:
    """Client-side replication: apply iff it is the next delta.

    Stale deltas (seq <= version) are dropped silently; a gap raises
    SequenceGap so the caller can request a snapshot.
    """
    if delta.seq <= scene.version:
        return scene
    if delta.seq > scene.version + 1:
        raise SequenceGap(f"delta seq {delta.seq} onto version {scene.version}")
    return _mutate(scene, delta.effect, delta.seq)


# -- serialization ------------------------------------------------------------

def canon_float(x: float) -> float:
    """Hashing canonicalization: 6 decimal places, -0.0 normalized away.
    Coerces to float first so int-typed coordinates serialize identically."""
    v = round(float(x), 6)
    return 0.0 if v == 0 else v


def _ident(x: float) -> float:
    return float(x)


def pose_to_dict(p: Pose, f=_ident) -> dict:
    return {"x": f(p.x), "y": f(p.y), "z": f(p.z), "yaw": f(p.yaw)}


def pose_from_dict(d: dict) -> Pose:
    return Pose(float(d["x"]), float(d["y"]), float(d["z"]), float(d["yaw"]))


def entity_to_dict(e: Entity, f=_ident) -> dict:
    return {"id": e.id, "kind": e.kind, "team": e.team, "label": e.label,
            "pose": pose_to_dict(e.pose, f),
            "controller": ({"kind": "Coach"} if e.controller is None
                           else {"kind": "PlayerClient", "client_id": e.controller}),
            "height_m": f(e.height_m), "speed_mps": f(e.speed_mps)}


def entity_from_dict(d: dict) -> Entity:
    ctl = d.get("controller") or {"kind": "Coach"}
    controller = None if ctl.get("kind") == "Coach" else str(ctl["client_id"])
    return Entity(id=str(d["id"]), kind=str(d["kind"]), team=d.get("team"),
                  label=str(d.get("label", "")), pose=pose_from_dict(d["pose"]),
                  controller=controller, height_m=float(d.get("height_m", 1.8)),
                  speed_mps=float(d.get("speed_mps", 0.0)))


def shape_to_dict(s: Shape, f=_ident) -> dict:
    if isinstance(s, Polyline):
        return {"kind": "Polyline", "points": [[f(x), f(y)] for x, y in s.points]}
    if isinstance(s, Arrow2D):
        return {"kind": "Arrow2D", "start": [f(s.start[0]), f(s.start[1])],
                "end": [f(s.end[0]), f(s.end[1])]}
    if isinstance(s, Arrow3D):
        return {"kind": "Arrow3D", "start": [f(c) for c in s.start],
                "end": [f(c) for c in s.end]}
    if isinstance(s, Zone):
        return {"kind": "Zone", "points": [[f(x), f(y)] for x, y in s.points]}
    if isinstance(s, Marker):
        return {"kind": "Marker", "point": [f(s.point[0]), f(s.point[1])],
                "text": s.text}
    raise TypeError(f"unknown shape {s!r}")


def shape_from_dict(d: dict) -> Shape:
    kind = d["kind"]
    if kind == "Polyline":
        return Polyline(tuple((float(x), float(y)) for x, y in d["points"]))
    if kind == "Arrow2D":
        return Arrow2D(tuple(float(c) for c in d["start"]),
                       tuple(float(c) for c in d["end"]))
    if kind == "Arrow3D":
        return Arrow3D(tuple(float(c) for c in d["start"]),
                       tuple(float(c) for c in d["end"]))
    if kind == "Zone":
        return Zone(tuple((float(x), float(y)) for x, y in d["points"]))
    if kind == "Marker":
        return Marker(tuple(float(c) for c in d["point"]), str(d.get("text", "")))
    raise InvalidGeometry(f"unknown shape kind {kind!r}")


def annotation_to_dict(a: Annotation, f=_ident) -> dict:
    return {"id": a.id, "shape": shape_to_dict(a.shape, f), "priority": a.priority,
            "created_at": a.created_at, "author": a.author}


def annotation_from_dict(d: dict) -> Annotation:
    return Annotation(id=str(d["id"]), shape=shape_from_dict(d["shape"]),
                      priority=int(d["priority"]), created_at=int(d["created_at"]),
                      author=str(d.get("author", "")))


def plan_to_dict(p: MotionPlan, f=_ident) -> dict:
    return {"entity_id": p.entity_id, "from": [f(p.origin[0]), f(p.origin[1])],
            "to": [f(p.target[0]), f(p.target[1])], "start_ms": p.start_ms,
            "duration_ms": p.duration_ms, "anticipation_ms": p.anticipation_ms,
            "easing": p.easing}


def plan_from_dict(d: dict) -> MotionPlan:
    return MotionPlan(entity_id=str(d["entity_id"]),
                      origin=tuple(float(c) for c in d["from"]),
                      target=tuple(float(c) for c in d["to"]),
                      start_ms=int(d["start_ms"]), duration_ms=int(d["duration_ms"]),
                      anticipation_ms=int(d.get("anticipation_ms", 0)),
                      easing=str(d.get("easing", "Smoothstep")))


def sequence_to_dict(s: TacticSequence, f=_ident) -> dict:
    return {"id": s.id, "name": s.name,
            "tracks": {eid: [[t, f(x), f(y)] for t, x, y in kfs]
                       for eid, kfs in s.tracks.items()},
            "warnings": [{"a": w.a, "b": w.b, "min_distance_m": f(w.min_distance_m),
                          "t_ms": w.t_ms} for w in s.warnings]}


def sequence_from_dict(d: dict) -> TacticSequence:
    tracks = {eid: tuple((int(t), float(x), float(y)) for t, x, y in kfs)
              for eid, kfs in d["tracks"].items()}
    warnings = tuple(TransitionWarning(str(w["a"]), str(w["b"]),
                                       float(w["min_distance_m"]), int(w["t_ms"]))
                     for w in d.get("warnings", []))
    return TacticSequence(id=str(d["id"]), name=str(d.get("name", d["id"])),
                          tracks=tracks, warnings=warnings)


def playback_to_dict(p: Playback, f=_ident) -> dict:
    d: dict[str, Any] = {"state": p.state, "playhead_ms": p.playhead_ms}
    if p.state == "playing":
        d["rate"] = f(p.rate)
        d["anchor_ms"] = p.anchor_ms
    return d


def playback_from_dict(d: dict) -> Playback:
    return Playback(state=str(d["state"]), playhead_ms=int(d["playhead_ms"]),
                    rate=(float(d["rate"]) if "rate" in d else None),
                    anchor_ms=(int(d["anchor_ms"]) if "anchor_ms" in d else None))


def effect_to_dict(e: Effect) -> dict:
    if isinstance(e, EntityUpsert):
        return {"kind": "EntityUpsert", "entity": entity_to_dict(e.entity)}
    if isinstance(e, EntityRemove):
        return {"kind": "EntityRemove", "id": e.id}
    if isinstance(e, AnnotationUpsert):
        return {"kind": "AnnotationUpsert", "annotation": annotation_to_dict(e.annotation)}
    if isinstance(e, AnnotationRemove):
        return {"kind": "AnnotationRemove", "id": e.id}
    if isinstance(e, ModeChange):
        return {"kind": "ModeChange", "mode": e.mode}
    if isinstance(e, PlanStart):
        return {"kind": "PlanStart", "plan": plan_to_dict(e.plan)}
    if isinstance(e, PlanEnd):
        return {"kind": "PlanEnd", "entity_id": e.entity_id}
    if isinstance(e, SequenceLoad):
        return {"kind": "SequenceLoad", "sequence": sequence_to_dict(e.sequence)}
    if isinstance(e, PlaybackChange):
        return {"kind": "PlaybackChange", "playback": playback_to_dict(e.playback)}
    if isinstance(e, PoseUpdate):
        d: dict[str, Any] = {"kind": "PoseUpdate", "id": e.id,
                             "pose": pose_to_dict(e.pose), "cancel_plan": e.cancel_plan}
        if e.speed_mps is not None:
            d["speed_mps"] = e.speed_mps
        return d
    raise TypeError(f"unknown effect {e!r}")


def effect_from_dict(d: dict) -> Effect:
    kind = d["kind"]
    if kind == "EntityUpsert":
        return EntityUpsert(entity_from_dict(d["entity"]))
    if kind == "EntityRemove":
        return EntityRemove(str(d["id"]))
    if kind == "AnnotationUpsert":
        return AnnotationUpsert(annotation_from_dict(d["annotation"]))
    if kind == "AnnotationRemove":
        return AnnotationRemove(str(d["id"]))
    if kind == "ModeChange":
        return ModeChange(str(d["mode"]))
    if kind == "PlanStart":
        return PlanStart(plan_from_dict(d["plan"]))
    if kind == "PlanEnd":
        return PlanEnd(str(d["entity_id"]))
    if kind == "SequenceLoad":
        return SequenceLoad(sequence_from_dict(d["sequence"]))
    if kind == "PlaybackChange":
        return PlaybackChange(playback_from_dict(d["playback"]))
    if kind == "PoseUpdate":
        speed = d.get("speed_mps")
        return PoseUpdate(str(d["id"]), pose_from_dict(d["pose"]),
                          cancel_plan=bool(d.get("cancel_plan", False)),
                          speed_mps=(None if speed is None else float(speed)))
    raise InvalidGeometry(f"unknown effect kind {kind!r}")


def command_body_to_dict(b: CommandBody) -> dict:
    if isinstance(b, SpawnEntity):
        return {"kind": "SpawnEntity", "entity": entity_to_dict(b.entity)}
    if isinstance(b, RemoveEntity):
        return {"kind": "RemoveEntity", "id": b.id}
    if isinstance(b, TeleportEntity):
        return {"kind": "TeleportEntity", "id": b.id, "pose": pose_to_dict(b.pose)}
    if isinstance(b, RetargetEntity):
        return {"kind": "RetargetEntity", "id": b.id,
                "target": [b.target[0], b.target[1]]}
    if isinstance(b, AddAnnotation):
        return {"kind": "AddAnnotation", "annotation": annotation_to_dict(b.annotation)}
    if isinstance(b, RemoveAnnotation):
        return {"kind": "RemoveAnnotation", "id": b.id}
    if isinstance(b, SetMode):
        return {"kind": "SetMode", "mode": b.mode}
    if isinstance(b, LoadSequence):
        return {"kind": "LoadSequence", "sequence": sequence_to_dict(b.sequence)}
    if isinstance(b, PlaybackControl):
        d: dict[str, Any] = {"kind": "PlaybackControl", "action": b.action}
        if b.rate is not None:
            d["rate"] = b.rate
        if b.position_ms is not None:
            d["position_ms"] = b.position_ms
        return d
    if isinstance(b, PlayerPose):
        return {"kind": "PlayerPose", "id": b.id, "pose": pose_to_dict(b.pose)}
    raise TypeError(f"unknown command body {b!r}")


def command_body_from_dict(d: dict) -> CommandBody:
    kind = d["kind"]
    if kind == "SpawnEntity":
        return SpawnEntity(entity_from_dict(d["entity"]))
    if kind == "RemoveEntity":
        return RemoveEntity(str(d["id"]))
    if kind == "TeleportEntity":
        return TeleportEntity(str(d["id"]), pose_from_dict(d["pose"]))
    if kind == "RetargetEntity":
        return RetargetEntity(str(d["id"]), tuple(float(c) for c in d["target"]))
    if kind == "AddAnnotation":
        return AddAnnotation(annotation_from_dict(d["annotation"]))
    if kind == "RemoveAnnotation":
        return RemoveAnnotation(str(d["id"]))
    if kind == "SetMode":
        return SetMode(str(d["mode"]))
    if kind == "LoadSequence":
        return LoadSequence(sequence_from_dict(d["sequence"]))
    if kind == "PlaybackControl":
        return PlaybackControl(action=str(d["action"]),
                               rate=(float(d["rate"]) if "rate" in d else None),
                               position_ms=(int(d["position_ms"])
                                            if "position_ms" in d else None))
    if kind == "PlayerPose":
        return PlayerPose(str(d["id"]), pose_from_dict(d["pose"]))
    raise InvalidGeometry(f"unknown command kind {kind!r}")


def scene_to_dict(scene: TacticScene, canonical: bool = False) -> dict:
    f = canon_float if canonical else _ident
    return {
        "pitch": {"length_m": f(scene.pitch.length_m), "width_m": f(scene.pitch.width_m)},
        "entities": {eid: entity_to_dict(e, f) for eid, e in scene.entities.items()},
        "annotations": {aid: annotation_to_dict(a, f)
                        for aid, a in scene.annotations.items()},
        "mode": scene.mode,
        "plans": {eid: plan_to_dict(p, f) for eid, p in scene.active_plans.items()},
        "sequence": None if scene.sequence is None else sequence_to_dict(scene.sequence, f),
        "playback": None if scene.playback is None else playback_to_dict(scene.playback, f),
        "version": scene.version,
    }


def scene_from_dict(d: dict) -> TacticScene:
    return TacticScene(
        pitch=PitchSpec(float(d["pitch"]["length_m"]), float(d["pitch"]["width_m"])),
        entities={eid: entity_from_dict(e) for eid, e in d["entities"].items()},
        annotations={aid: annotation_from_dict(a) for aid, a in d["annotations"].items()},
        mode=str(d["mode"]),
        active_plans={eid: plan_from_dict(p) for eid, p in d.get("plans", {}).items()},
        sequence=None if d.get("sequence") is None else sequence_from_dict(d["sequence"]),
        playback=None if d.get("playback") is None else playback_from_dict(d["playback"]),
        version=int(d["version"]),
    )


def canonical_scene_json(scene: TacticScene) -> str:
    """Sorted keys, compact separators, floats rounded to 1e-6 and rendered
    in shortest round-trip decimal form (json uses repr)."""
    return json.dumps(scene_to_dict(scene, canonical=True),
                      sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def fnv1a64(data: bytes) -> str:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def scene_hash(scene: TacticScene) -> str:
    return fnv1a64(canonical_scene_json(scene).encode("utf-8"))

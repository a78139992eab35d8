"""Transport-agnostic session logic.

SessionCore owns the authoritative scene: it welcomes clients, enforces the
authority matrix, turns accepted commands into totally ordered deltas,
samples active motion plans and sequence playback on ticks, and appends
every applied effect to the session log.  ReplayCore serves a recorded log
back as a read-only session.

Both cores speak in Envelopes and are driven by a caller-supplied monotonic
clock, so the same logic runs unmodified under the real WebSocket transport
and the simulated-network harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from . import motion, scene as sc
from .protocol import (AUTHORITY_ERROR, COACH, OBSERVER, CoachDisconnected,
                       CoachReconnected, EndSession, Envelope, Role,
                       SessionState, SetSessionMode, StartSession,
                       authority_check, role_to_dict, session_transition)
from .sessionlog import (RECORD_DELTA, RECORD_POSE_RELAY, CorruptLog, LogRecord,
                         SessionLog, SessionLogWriter)

POSE_RELAY_MIN_INTERVAL_MS = 100  # relay each entity's pose at <= 10 Hz

Outgoing = tuple[str, Envelope]


@dataclass(frozen=True)
class ServerConfig:
    port: int = 8080
    pitch: sc.PitchSpec = field(default_factory=sc.PitchSpec)
    record_path: Optional[str] = None
    v_max: float = motion.DEFAULT_V_MAX
    n_max: int = 5
    d_ref: float = 15.0
    tick_hz: int = 30

    def __post_init__(self):
        if not (1 <= self.tick_hz <= 120):
            raise ValueError("tick_hz must be within [1, 120]")
        if self.v_max <= 0:
            raise ValueError("v_max must be > 0")


class SessionCore:
    def __init__(self, config: ServerConfig,
                 log_writer: Optional[SessionLogWriter] = None):
        self.config = config
        self.scene = sc.initial_scene(config.pitch)
        self.session = SessionState()
        self.roles: dict[str, Role] = {}
        self.welcomed: set[str] = set()
        self.coach_id: Optional[str] = None
        self.log_writer = log_writer
        self._next_client = 0
        self._anchor_ms: Optional[int] = None  # transport time of Active start
        self._pending_poses: dict[str, sc.Pose] = {}
        self._last_relay_ms: dict[str, int] = {}

    # -- time ----------------------------------------------------------------

    def session_ms(self, now_ms: int) -> int:
        if self._anchor_ms is None:
            return 0
        return now_ms - self._anchor_ms

    def quiescent(self) -> bool:
        """No pending motion: safe point for convergence measurements."""
        playing = self.scene.playback is not None and self.scene.playback.state == "playing"
        return not self.scene.active_plans and not self._pending_poses and not playing

    # -- connection lifecycle --------------------------------------------------

    def connect(self, now_ms: int) -> str:
        self._next_client += 1
        return f"c{self._next_client}"

    def on_disconnect(self, client_id: str, now_ms: int) -> list[Outgoing]:
        self.roles.pop(client_id, None)
        self.welcomed.discard(client_id)
        if client_id == self.coach_id:
            self.coach_id = None
            self.session = session_transition(self.session, CoachDisconnected())
        return []

    def end_session(self, now_ms: int) -> list[Outgoing]:
        t = self.session_ms(now_ms)
        out = [(cid, Envelope("Bye", "server", t, {})) for cid in sorted(self.welcomed)]
        if self.session.phase == "Active" and self.coach_id is not None:
            self.session = session_transition(self.session, EndSession(COACH))
        return out

    # -- inbound frames ---------------------------------------------------------

    def on_frame(self, client_id: str, env: Envelope, now_ms: int) -> list[Outgoing]:
        if env.kind == "Hello":
            return self._on_hello(client_id, env, now_ms)
        if env.kind == "Ping":
            t0 = env.payload.get("t0", 0)
            return [(client_id, Envelope("Pong", "server", self.session_ms(now_ms),
                                         {"t0": t0, "t1": self.session_ms(now_ms)}))]
        if env.kind == "SnapshotRequest":
            return [(client_id, self._snapshot_frame(now_ms))]
        if env.kind == "Command":
            return self._on_command(client_id, env, now_ms)
        if env.kind == "Bye":
            return self.on_disconnect(client_id, now_ms)
        # Server-to-client kinds arriving here are ignored rather than fatal.
        return []

    def _snapshot_frame(self, now_ms: int) -> Envelope:
        return Envelope("Snapshot", "server", self.session_ms(now_ms),
                        {"scene": sc.scene_to_dict(self.scene, canonical=True),
                         "seq": self.scene.version})

    def _on_hello(self, client_id: str, env: Envelope, now_ms: int) -> list[Outgoing]:
        if client_id in self.welcomed:
            return [(client_id, self._welcome(client_id, now_ms))]
        desired = str(env.payload.get("desired_role", "Observer"))
        role = OBSERVER
        if desired == "Coach" and not self.session.coach_connected:
            role = COACH
            self.coach_id = client_id
            if self.session.phase == "Lobby":
                self.session = session_transition(self.session, StartSession(COACH))
                self._anchor_ms = now_ms
            else:
                self.session = session_transition(self.session, CoachReconnected())
        elif desired == "Player":
            eid = env.payload.get("entity_id")
            ent = self.scene.entities.get(eid) if eid else None
            bound = {r.entity_id for r in self.roles.values() if r.kind == "Player"}
            if ent is not None and ent.kind == "Player" and eid not in bound:
                role = Role("Player", eid)
        self.roles[client_id] = role
        self.welcomed.add(client_id)
        return [(client_id, self._welcome(client_id, now_ms))]

    def _welcome(self, client_id: str, now_ms: int) -> Envelope:
        return Envelope("Welcome", "server", self.session_ms(now_ms),
                        {"client_id": client_id,
                         "role": role_to_dict(self.roles[client_id]),
                         "snapshot": sc.scene_to_dict(self.scene, canonical=True),
                         "seq": self.scene.version})

    # -- commands -----------------------------------------------------------------

    def _reject(self, client_id: str, command_id: str, reason: str,
                now_ms: int) -> list[Outgoing]:
        return [(client_id, Envelope("Reject", "server", self.session_ms(now_ms),
                                     {"command_id": command_id, "reason": reason}))]

    def _on_command(self, client_id: str, env: Envelope, now_ms: int) -> list[Outgoing]:
        command_id = str(env.payload.get("command_id", ""))
        if client_id not in self.welcomed:
            return self._reject(client_id, command_id, "NotWelcomed", now_ms)
        if self.session.phase != "Active":
            return self._reject(client_id, command_id, "NotActive", now_ms)
        if not self.session.coach_connected:
            return self._reject(client_id, command_id, "NoCoach", now_ms)
        try:
            body = sc.command_body_from_dict(env.payload["body"])
        except (KeyError, TypeError, ValueError, sc.SceneError):
            return self._reject(client_id, command_id, "MalformedBody", now_ms)
        cmd = sc.Command(command_id=command_id, issuer=client_id, body=body)
        deny = authority_check(self.roles[client_id], self.scene.mode, cmd)
        if deny is not None:
            return self._reject(client_id, command_id, deny, now_ms)

        if isinstance(body, sc.PlayerPose):
            # Ephemeral, latest-wins: buffered and relayed on the next tick.
            if body.id not in self.scene.entities:
                return self._reject(client_id, command_id, "UnknownEntity", now_ms)
            self._pending_poses[body.id] = body.pose
            return []

        t = self.session_ms(now_ms)
        before = self.scene.version
        try:
            self.scene, delta = sc.apply_command(self.scene, cmd, t,
                                                 v_max=self.config.v_max)
        except sc.SceneError as e:
            return self._reject(client_id, command_id, type(e).__name__, now_ms)
        if self.scene.version == before:
            return []  # idempotent replay: the delta was already broadcast
        if isinstance(body, sc.SetMode):
            self.session = session_transition(self.session, SetSessionMode(body.mode))
        self._record(delta, RECORD_DELTA)
        return self._broadcast_delta(delta)

    # -- ticking --------------------------------------------------------------------

    def on_tick(self, now_ms: int) -> list[Outgoing]:
        if self.session.phase != "Active":
            return []
        t = self.session_ms(now_ms)
        out: list[Outgoing] = []

        for eid in sorted(self._pending_poses):
            if t - self._last_relay_ms.get(eid, -10**12) < POSE_RELAY_MIN_INTERVAL_MS:
                continue
            pose = self._pending_poses.pop(eid)
            if eid not in self.scene.entities:
                continue
            effect = sc.PoseUpdate(eid, pose, cancel_plan=True)
            self.scene, delta = sc.apply_effect(self.scene, effect, t)
            self._last_relay_ms[eid] = t
            self._record(delta, RECORD_POSE_RELAY)
            out.extend(self._broadcast_delta(delta))

        for eid in sorted(self.scene.active_plans):
            plan = self.scene.active_plans[eid]
            if t < plan.start_ms:
                continue
            ent = self.scene.entities[eid]
            sample = motion.sample_motion(plan, min(t, plan.end_ms), ent.pose.yaw)
            pose = sc.Pose(sample.x, sample.y, 0.0, sample.yaw)
            effect = sc.PoseUpdate(eid, pose, speed_mps=sample.speed_mps)
            self.scene, delta = sc.apply_effect(self.scene, effect, t)
            self._record(delta, RECORD_DELTA)
            out.extend(self._broadcast_delta(delta))
            if t >= plan.end_ms:
                self.scene, delta = sc.apply_effect(self.scene, sc.PlanEnd(eid), t)
                self._record(delta, RECORD_DELTA)
                out.extend(self._broadcast_delta(delta))

        seq = self.scene.sequence
        pb = self.scene.playback
        if seq is not None and pb is not None and pb.state == "playing":
            pos = pb.position_at(t)
            finished = pos >= seq.duration_ms
            pos = min(pos, float(seq.duration_ms))
            samples = motion.sample_sequence(seq, pos)
            for eid in sorted(samples):
                if eid not in self.scene.entities:
                    continue
                s = samples[eid]
                pose = sc.Pose(s.x, s.y, 0.0, s.yaw)
                effect = sc.PoseUpdate(eid, pose,
                                       speed_mps=0.0 if finished else s.speed_mps)
                self.scene, delta = sc.apply_effect(self.scene, effect, t)
                self._record(delta, RECORD_DELTA)
                out.extend(self._broadcast_delta(delta))
            if finished:
                effect = sc.PlaybackChange(sc.Playback("paused", seq.duration_ms))
                self.scene, delta = sc.apply_effect(self.scene, effect, t)
                self._record(delta, RECORD_DELTA)
                out.extend(self._broadcast_delta(delta))
        return out

    # -- plumbing ---------------------------------------------------------------------

    def _broadcast_delta(self, delta: sc.StateDelta) -> list[Outgoing]:
        env = Envelope("Delta", "server", delta.session_time_ms,
                       {"seq": delta.seq, "effect": sc.effect_to_dict(delta.effect)},
                       seq=delta.seq)
        return [(cid, env) for cid in sorted(self.welcomed)]

    def _record(self, delta: sc.StateDelta, kind: str):
        if self.log_writer is not None:
            self.log_writer.append(LogRecord(delta.session_time_ms, delta.seq,
                                             kind, delta.effect))


# -- replay -----------------------------------------------------------------------------


def replay_log(log: SessionLog, rate: float = 1.0, mode: str = "verify"):
    """verify: apply every record at infinite speed and return the final
    scene_hash; serve: construct a ReplayCore for hosting the log read-only.
    """
    if mode == "verify":
        state = sc.initial_scene(log.pitch)
        prev_t = -1
        for i, rec in enumerate(log.records, start=1):
            if rec.seq != state.version + 1:
                raise CorruptLog(
                    f"seq {rec.seq} after version {state.version}", i)
            if rec.session_time_ms < prev_t:
                raise CorruptLog(
                    f"time {rec.session_time_ms} ms before {prev_t} ms", i)
            prev_t = rec.session_time_ms
            state = sc.apply_delta(state, rec.delta())
        return sc.scene_hash(state)
    if mode == "serve":
        return ReplayCore(log, rate)
    raise ValueError(f"unknown replay mode {mode!r}")


class ReplayCore:
    """Read-only session replaying a recorded log.

    Every connected client is an Observer except a single Coach-role operator
    who may drive PlaybackControl (play/pause/seek/stop).  Emitted deltas are
    re-stamped with a fresh sequence so observer mirrors stay contiguous even
    across backward seeks.
    """

    def __init__(self, log: SessionLog, rate: float = 1.0):
        if rate <= 0:
            raise ValueError("rate must be > 0")
        self.log = log
        self.rate = rate
        self.scene = sc.initial_scene(log.pitch)
        self.out_seq = 0
        self.idx = 0  # next record to emit
        self.log_pos_ms = 0.0
        self.playing = True
        self._anchor: Optional[tuple[int, float]] = None  # (now_ms, log_pos)
        self.roles: dict[str, Role] = {}
        self.welcomed: set[str] = set()
        self.operator_id: Optional[str] = None
        self._next_client = 0

    # connection surface mirrors SessionCore

    def connect(self, now_ms: int) -> str:
        self._next_client += 1
        return f"r{self._next_client}"

    def on_disconnect(self, client_id: str, now_ms: int) -> list[Outgoing]:
        self.roles.pop(client_id, None)
        self.welcomed.discard(client_id)
        if client_id == self.operator_id:
            self.operator_id = None
        return []

    def end_session(self, now_ms: int) -> list[Outgoing]:
        return [(cid, Envelope("Bye", "server", int(self.log_pos_ms), {}))
                for cid in sorted(self.welcomed)]

    def quiescent(self) -> bool:
        return not self.playing

    def on_frame(self, client_id: str, env: Envelope, now_ms: int) -> list[Outgoing]:
        if env.kind == "Hello":
            desired = str(env.payload.get("desired_role", "Observer"))
            if client_id not in self.welcomed:
                role = OBSERVER
                if desired == "Coach" and self.operator_id is None:
                    role = COACH
                    self.operator_id = client_id
                self.roles[client_id] = role
                self.welcomed.add(client_id)
            return [(client_id, self._welcome(client_id))]
        if env.kind == "Ping":
            t0 = env.payload.get("t0", 0)
            return [(client_id, Envelope("Pong", "server", int(self.log_pos_ms),
                                         {"t0": t0, "t1": int(self.log_pos_ms)}))]
        if env.kind == "SnapshotRequest":
            return [(client_id, self._snapshot_env())]
        if env.kind == "Command":
            return self._on_command(client_id, env, now_ms)
        if env.kind == "Bye":
            return self.on_disconnect(client_id, now_ms)
        return []

    def _scene_dict(self) -> dict:
        d = sc.scene_to_dict(self.scene, canonical=True)
        d["version"] = self.out_seq
        return d

    def _welcome(self, client_id: str) -> Envelope:
        return Envelope("Welcome", "server", int(self.log_pos_ms),
                        {"client_id": client_id,
                         "role": role_to_dict(self.roles[client_id]),
                         "snapshot": self._scene_dict(), "seq": self.out_seq})

    def _snapshot_env(self) -> Envelope:
        return Envelope("Snapshot", "server", int(self.log_pos_ms),
                        {"scene": self._scene_dict(), "seq": self.out_seq})

    def _on_command(self, client_id: str, env: Envelope, now_ms: int) -> list[Outgoing]:
        command_id = str(env.payload.get("command_id", ""))

        def reject(reason):
            return [(client_id, Envelope("Reject", "server", int(self.log_pos_ms),
                                         {"command_id": command_id, "reason": reason}))]

        if client_id != self.operator_id:
            return reject(AUTHORITY_ERROR)
        try:
            body = sc.command_body_from_dict(env.payload["body"])
        except (KeyError, TypeError, ValueError, sc.SceneError):
            return reject("MalformedBody")
        if not isinstance(body, sc.PlaybackControl):
            return reject(AUTHORITY_ERROR)
        if body.action == "play":
            if body.rate is not None:
                if body.rate <= 0:
                    return reject("InvalidGeometry")
                self.rate = body.rate
            self._anchor = (now_ms, self.log_pos_ms)
            self.playing = True
            return []
        if body.action == "pause":
            self.playing = False
            self._anchor = None
            return []
        if body.action == "stop":
            return self._seek(0, now_ms, stop=True)
        if body.action == "seek":
            if body.position_ms is None:
                return reject("MalformedBody")
            return self._seek(int(body.position_ms), now_ms)
        return reject("MalformedBody")

    def _seek(self, position_ms: int, now_ms: int, stop: bool = False) -> list[Outgoing]:
        position_ms = max(0, position_ms)
        state = sc.initial_scene(self.log.pitch)
        idx = 0
        for rec in self.log.records:
            if rec.session_time_ms > position_ms:
                break
            state = sc.apply_delta(state, rec.delta())
            idx += 1
        self.idx = idx
        self.log_pos_ms = float(position_ms)
        self.out_seq += 1
        # Internal version tracks the re-stamped sequence, not the log's.
        self.scene = replace(state, version=self.out_seq)
        if stop:
            self.playing = False
            self._anchor = None
        elif self.playing:
            self._anchor = (now_ms, self.log_pos_ms)
        env = self._snapshot_env()
        return [(cid, env) for cid in sorted(self.welcomed)]

    def on_tick(self, now_ms: int) -> list[Outgoing]:
        if not self.playing:
            return []
        if self._anchor is None:
            self._anchor = (now_ms, self.log_pos_ms)
        anchor_now, anchor_pos = self._anchor
        target = anchor_pos + (now_ms - anchor_now) * self.rate
        out: list[Outgoing] = []
        while self.idx < len(self.log.records):
            rec = self.log.records[self.idx]
            if rec.session_time_ms > target:
                break
            self.out_seq += 1
            delta = sc.StateDelta(self.out_seq, rec.session_time_ms, rec.effect)
            self.scene = sc.apply_delta(self.scene, delta)
            env = Envelope("Delta", "server", rec.session_time_ms,
                           {"seq": self.out_seq, "effect": sc.effect_to_dict(rec.effect)},
                           seq=self.out_seq)
            out.extend((cid, env) for cid in sorted(self.welcomed))
            self.idx += 1
        self.log_pos_ms = target
        if self.idx >= len(self.log.records):
            self.playing = False
            self._anchor = None
        return out

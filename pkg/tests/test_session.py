"""Session core: welcomes, authority enforcement, ticking, recording, replay."""

import io
import math

import pytest

from panocoach import motion, netsim
from panocoach import scene as sc
from panocoach import sessionlog
from panocoach.protocol import Envelope
from panocoach.session import ReplayCore, ServerConfig, SessionCore, replay_log
from panocoach.sessionlog import CorruptLog, SessionLogWriter, read_log


def hello(desired="Coach", entity_id=None):
    payload = {"desired_role": desired}
    if entity_id:
        payload["entity_id"] = entity_id
    return Envelope("Hello", "", 0, payload)


def command(body, cmd_id):
    return Envelope("Command", "", 0,
                    {"command_id": cmd_id, "body": sc.command_body_to_dict(body)})


def join(core, now=0, desired="Coach", entity_id=None):
    cid = core.connect(now)
    out = core.on_frame(cid, hello(desired, entity_id), now)
    assert out[0][1].kind == "Welcome"
    return cid, out[0][1]


def frames_of_kind(out, kind):
    return [env for _, env in out if env.kind == kind]


def run_scripted_session(seed, n_commands=40, tick_hz=30, include_playback=True,
                         log_stream=None):
    """Drive a full session deterministically: coach joins at 0, script
    commands interleaved with ticks, then ticks until all motion settles."""
    config = ServerConfig(tick_hz=tick_hz)
    writer = None
    if log_stream is not None:
        writer = SessionLogWriter(log_stream, config.pitch, created_at="scripted")
    core = SessionCore(config, writer)
    cid, _ = join(core)
    script = netsim.generate_script(seed, n_commands, include_playback=include_playback)
    tick_interval = 1000.0 / tick_hz
    events = [(float(t), i, ("cmd", body)) for i, (t, body) in enumerate(script)]
    end = max(t for t, _ in script)
    t, n = 0.0, 0
    while t <= end + 12_000:
        events.append((t, 10**6 + n, ("tick", None)))
        t += tick_interval
        n += 1
    events.sort(key=lambda e: (e[0], e[1]))
    cmd_n = 0
    for when, _, (kind, body) in events:
        now = int(when)
        if kind == "cmd":
            cmd_n += 1
            core.on_frame(cid, command(body, f"s{cmd_n}"), now)
        else:
            core.on_tick(now)
            if when > end and core.quiescent():
                break
    assert core.quiescent()
    return core


class TestConnectionLifecycle:
    def test_coach_join_activates_lecture(self):
        core = SessionCore(ServerConfig())
        cid, welcome = join(core)
        assert welcome.payload["role"] == {"role": "Coach"}
        assert core.session.phase == "Active" and core.session.mode == "Lecture"
        assert welcome.payload["seq"] == 0

    def test_second_coach_becomes_observer(self):
        core = SessionCore(ServerConfig())
        join(core)
        _, welcome = join(core, desired="Coach")
        assert welcome.payload["role"] == {"role": "Observer"}

    def test_late_joiner_snapshot_contains_all_entities(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        for i in range(11):
            core.on_frame(cid, command(
                sc.SpawnEntity(sc.Entity(id=f"p{i}", kind="Player",
                                         pose=sc.Pose(i, 0, 0, 0))), f"c{i}"), 10)
        _, welcome = join(core, now=50, desired="Observer")
        snap = welcome.payload["snapshot"]
        assert len(snap["entities"]) == 11
        assert welcome.payload["seq"] == 11 == snap["version"]

    def test_player_binding_requires_existing_player_entity(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p7")), "c1"), 0)
        _, w = join(core, desired="Player", entity_id="p7")
        assert w.payload["role"] == {"role": "Player", "entity_id": "p7"}
        _, w2 = join(core, desired="Player", entity_id="p7")  # already bound
        assert w2.payload["role"] == {"role": "Observer"}
        _, w3 = join(core, desired="Player", entity_id="ghost")
        assert w3.payload["role"] == {"role": "Observer"}

    def test_coach_disconnect_rejects_commands_until_reconnect(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        ocid, _ = join(core, desired="Observer")
        core.on_disconnect(cid, 100)
        assert core.session.phase == "Active"
        out = core.on_frame(ocid, command(sc.SetMode("Review"), "x"), 110)
        assert frames_of_kind(out, "Reject")[0].payload["reason"] == "NoCoach"
        cid2, w = join(core, now=200, desired="Coach")
        assert w.payload["role"] == {"role": "Coach"}
        out = core.on_frame(cid2, command(sc.SetMode("Review"), "y"), 210)
        assert frames_of_kind(out, "Delta")

    def test_session_time_anchors_at_activation(self):
        core = SessionCore(ServerConfig())
        assert core.session_ms(5000) == 0  # lobby
        join(core, now=5000)
        assert core.session_ms(5000) == 0
        assert core.session_ms(7500) == 2500


class TestCommandFlow:
    def test_delta_broadcast_to_all_welcomed(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        o1, _ = join(core, desired="Observer")
        o2, _ = join(core, desired="Observer")
        out = core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c"), 10)
        targets = sorted(t for t, e in out if e.kind == "Delta")
        assert targets == sorted([cid, o1, o2])
        env = out[0][1]
        assert env.seq == 1 and env.payload["seq"] == 1

    def test_duplicate_command_id_broadcasts_exactly_once(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        c = command(sc.SpawnEntity(sc.Entity(id="p1")), "dup")
        first = core.on_frame(cid, c, 10)
        second = core.on_frame(cid, c, 20)
        assert frames_of_kind(first, "Delta")
        assert second == []
        assert core.scene.version == 1

    def test_denied_commands_never_mutate_scene(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c1"), 0)
        pcid, _ = join(core, desired="Player", entity_id="p1")
        ocid, _ = join(core, desired="Observer")
        h = sc.scene_hash(core.scene)
        attempts = [
            (ocid, sc.SetMode("Review")),
            (ocid, sc.PlayerPose("p1", sc.Pose(1, 1, 0, 0))),
            (pcid, sc.SetMode("Review")),
            (pcid, sc.PlayerPose("p1", sc.Pose(1, 1, 0, 0))),  # Lecture: denied
            (pcid, sc.RemoveEntity("p1")),
        ]
        for i, (who, body) in enumerate(attempts):
            out = core.on_frame(who, command(body, f"d{i}"), 50)
            assert frames_of_kind(out, "Reject")
            assert sc.scene_hash(core.scene) == h

    def test_scene_error_reject_reasons(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        out = core.on_frame(cid, command(sc.RemoveEntity("nope"), "e1"), 0)
        assert frames_of_kind(out, "Reject")[0].payload["reason"] == "UnknownEntity"
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "e2"), 0)
        out = core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "e3"), 0)
        assert frames_of_kind(out, "Reject")[0].payload["reason"] == "DuplicateId"

    def test_snapshot_request(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c"), 5)
        out = core.on_frame(cid, Envelope("SnapshotRequest", "", 0, {}), 10)
        snap = frames_of_kind(out, "Snapshot")[0]
        assert snap.payload["seq"] == 1
        assert "p1" in snap.payload["scene"]["entities"]

    def test_ping_pong(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core, now=1000)
        out = core.on_frame(cid, Envelope("Ping", "", 0, {"t0": 77}), 1400)
        pong = frames_of_kind(out, "Pong")[0]
        assert pong.payload == {"t0": 77, "t1": 400}


class TestTicking:
    def test_plan_start_precedes_tick_poses(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c1"), 0)
        out = core.on_frame(cid, command(sc.RetargetEntity("p1", (8.0, 0.0)), "c2"), 0)
        plan_delta = frames_of_kind(out, "Delta")[0]
        assert plan_delta.payload["effect"]["kind"] == "PlanStart"
        seqs = [plan_delta.payload["seq"]]
        t = 0
        while core.scene.active_plans:
            t += 33
            for env in frames_of_kind(core.on_tick(t), "Delta"):
                seqs.append(env.payload["seq"])
        assert seqs == sorted(seqs)
        assert core.scene.entities["p1"].pose.x == pytest.approx(8.0)

    def test_tick_poses_match_sample_motion(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c1"), 0)
        core.on_frame(cid, command(sc.RetargetEntity("p1", (6.0, 3.0)), "c2"), 0)
        plan = core.scene.active_plans["p1"]
        times = []
        t = 0
        while core.scene.active_plans:
            t += 37
            for env in frames_of_kind(core.on_tick(t), "Delta"):
                if env.payload["effect"]["kind"] != "PoseUpdate":
                    continue
                times.append(env.session_time_ms)
                pose = env.payload["effect"]["pose"]
                ref = motion.sample_motion(plan, min(env.session_time_ms, plan.end_ms))
                assert math.hypot(pose["x"] - ref.x, pose["y"] - ref.y) < 1e-6
        assert times == sorted(times) and len(set(times)) == len(times)

    def test_anticipation_delays_motion(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c1"), 0)
        core.on_frame(cid, command(sc.RetargetEntity("p1", (8.0, 0.0)), "c2"), 0)
        # Lecture: plan starts at +500 ms, so early ticks emit nothing
        assert frames_of_kind(core.on_tick(100), "Delta") == []
        assert frames_of_kind(core.on_tick(400), "Delta") == []
        assert frames_of_kind(core.on_tick(510), "Delta")

    def test_pose_relay_coalesces_to_ten_hz(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c1"), 0)
        core.on_frame(cid, command(sc.SetMode("Rehearsal"), "c2"), 0)
        pcid, _ = join(core, desired="Player", entity_id="p1")
        relayed = {}  # seq -> session time; broadcasts fan out per client
        for ms in range(0, 1000, 25):  # player streams at 40 Hz
            body = sc.PlayerPose("p1", sc.Pose(ms / 100.0, 0, 0, 0))
            out = core.on_frame(pcid, command(body, f"pose-{ms}"), ms)
            assert frames_of_kind(out, "Reject") == []
            for env in frames_of_kind(core.on_tick(ms + 1), "Delta"):
                if env.payload["effect"]["kind"] == "PoseUpdate":
                    relayed[env.payload["seq"]] = env.session_time_ms
        own = sorted(relayed.values())
        assert len(own) <= 11  # 1 s at <= 10 Hz (plus the t=1 edge)
        assert all(b - a >= 100 for a, b in zip(own, own[1:]))
        # latest-wins: final applied pose is the newest buffered one
        core.on_tick(1200)
        assert core.scene.entities["p1"].pose.x == pytest.approx(9.75)

    def test_sequence_playback_emits_and_finishes(self):
        core = SessionCore(ServerConfig())
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c1"), 0)
        seq = motion.TacticSequence(id="s", name="s",
                                    tracks={"p1": ((0, 0.0, 0.0), (600, 6.0, 0.0))})
        core.on_frame(cid, command(sc.LoadSequence(seq), "c2"), 0)
        core.on_frame(cid, command(sc.PlaybackControl("play", rate=1.0), "c3"), 0)
        t = 0
        while core.scene.playback.state == "playing":
            t += 33
            core.on_tick(t)
            assert t < 5000
        assert core.scene.playback.state == "paused"
        assert core.scene.playback.playhead_ms == 600
        assert core.scene.entities["p1"].pose.x == pytest.approx(6.0)


class TestRecordReplay:
    def test_replay_matches_live_hash(self):
        for seed in range(5):
            buf = io.StringIO()
            core = run_scripted_session(seed, n_commands=30, log_stream=buf)
            log = read_log(io.StringIO(buf.getvalue()))
            assert replay_log(log, mode="verify") == sc.scene_hash(core.scene)

    def test_empty_log_hashes_initial_scene(self):
        buf = io.StringIO()
        SessionLogWriter(buf, sc.PitchSpec(), created_at="x")
        log = read_log(io.StringIO(buf.getvalue()))
        assert replay_log(log, mode="verify") == sc.scene_hash(sc.initial_scene())

    def test_seq_jump_detected(self):
        buf = io.StringIO()
        writer = SessionLogWriter(buf, sc.PitchSpec(), created_at="x")
        e = sc.EntityUpsert(sc.Entity(id="p1"))
        writer.append(sessionlog.LogRecord(0, 1, "delta", e))
        writer.append(sessionlog.LogRecord(1, 2, "delta", sc.PoseUpdate("p1", sc.Pose(1, 0, 0, 0))))
        writer.append(sessionlog.LogRecord(2, 5, "delta", sc.PoseUpdate("p1", sc.Pose(2, 0, 0, 0))))
        log = read_log(io.StringIO(buf.getvalue()))
        with pytest.raises(CorruptLog) as err:
            replay_log(log, mode="verify")
        assert err.value.index == 3

    def test_nonmonotone_time_detected(self):
        buf = io.StringIO()
        writer = SessionLogWriter(buf, sc.PitchSpec(), created_at="x")
        writer.append(sessionlog.LogRecord(500, 1, "delta", sc.EntityUpsert(sc.Entity(id="a"))))
        writer.append(sessionlog.LogRecord(400, 2, "delta", sc.EntityUpsert(sc.Entity(id="b"))))
        log = read_log(io.StringIO(buf.getvalue()))
        with pytest.raises(CorruptLog) as err:
            replay_log(log, mode="verify")
        assert err.value.index == 2

    def test_truncated_log_verifies_at_every_record_boundary(self):
        buf = io.StringIO()
        run_scripted_session(3, n_commands=25, log_stream=buf)
        lines = buf.getvalue().splitlines()
        for cut in range(1, len(lines) + 1):
            log = read_log(lines[:cut])
            assert replay_log(log, mode="verify")  # no CorruptLog raised

    def test_pose_relays_recorded_and_replayed(self):
        buf = io.StringIO()
        config = ServerConfig()
        writer = SessionLogWriter(buf, config.pitch, created_at="x")
        core = SessionCore(config, writer)
        cid, _ = join(core)
        core.on_frame(cid, command(sc.SpawnEntity(sc.Entity(id="p1")), "c1"), 0)
        core.on_frame(cid, command(sc.SetMode("Rehearsal"), "c2"), 0)
        pcid, _ = join(core, desired="Player", entity_id="p1")
        core.on_frame(pcid, command(sc.PlayerPose("p1", sc.Pose(4, 4, 0, 1)), "p"), 10)
        core.on_tick(120)
        log = read_log(io.StringIO(buf.getvalue()))
        kinds = [r.kind for r in log.records]
        assert "pose_relay" in kinds
        assert replay_log(log, mode="verify") == sc.scene_hash(core.scene)


class TestReplayServe:
    def make_log(self):
        buf = io.StringIO()
        run_scripted_session(9, n_commands=20, log_stream=buf)
        return read_log(io.StringIO(buf.getvalue()))

    def test_serve_streams_all_records(self):
        log = self.make_log()
        replay = replay_log(log, rate=2.0, mode="serve")
        assert isinstance(replay, ReplayCore)
        cid = replay.connect(0)
        out = replay.on_frame(cid, hello("Observer"), 0)
        assert out[0][1].kind == "Welcome"
        mirror = sc.scene_from_dict(out[0][1].payload["snapshot"])
        received = 0
        t = 0
        while replay.playing:
            t += 50
            for _, env in replay.on_tick(t):
                if env.kind == "Delta":
                    delta = sc.StateDelta(env.payload["seq"], env.session_time_ms,
                                          sc.effect_from_dict(env.payload["effect"]))
                    mirror = sc.apply_delta(mirror, delta)
                    received += 1
        assert received == len(log.records)
        assert sc.scene_hash(mirror) == replay_log(log, mode="verify")

    def test_operator_seek_rewinds_via_snapshot(self):
        log = self.make_log()
        replay = ReplayCore(log, rate=1.0)
        op = replay.connect(0)
        replay.on_frame(op, hello("Coach"), 0)
        ob = replay.connect(0)
        replay.on_frame(ob, hello("Observer"), 0)
        # drain everything
        t = 0
        while replay.playing:
            t += 100
            replay.on_tick(t)
        end_version = replay.out_seq
        out = replay.on_frame(op, command(sc.PlaybackControl("seek", position_ms=0), "s"), t)
        snaps = frames_of_kind(out, "Snapshot")
        assert len(snaps) == 2  # operator and observer both reset
        assert snaps[0].payload["seq"] == end_version + 1
        assert snaps[0].payload["scene"]["entities"] == {}

    def test_observer_commands_rejected(self):
        log = self.make_log()
        replay = ReplayCore(log)
        ob = replay.connect(0)
        replay.on_frame(ob, hello("Observer"), 0)
        out = replay.on_frame(ob, command(sc.PlaybackControl("pause"), "x"), 0)
        assert frames_of_kind(out, "Reject")
        op = replay.connect(0)
        replay.on_frame(op, hello("Coach"), 0)
        out = replay.on_frame(op, command(sc.SetMode("Review"), "y"), 0)
        assert frames_of_kind(out, "Reject")  # only PlaybackControl allowed

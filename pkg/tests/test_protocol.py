"""Framing, authority matrix, clock offset, session lifecycle, gap logic."""

import random

import pytest

from panocoach import protocol as pr
from panocoach import scene as sc


def env(kind="Ping", payload=None, seq=None):
    return pr.Envelope(kind=kind, sender="c1", session_time_ms=123,
                       payload=payload or {"t0": 5}, seq=seq)


class TestFraming:
    def test_round_trip(self):
        for e in (env(),
                  env("Delta", {"seq": 9, "effect": {"kind": "EntityRemove", "id": "p"}}, seq=9),
                  env("Hello", {"desired_role": "Player", "entity_id": "p7"}),
                  env("Snapshot", {"scene": {"nested": [1, 2.5, "x"]}, "seq": 0})):
            assert pr.decode_frame(pr.encode_frame(e)) == e

    def test_length_prefix_is_big_endian_four_bytes(self):
        frame = pr.encode_frame(env())
        assert int.from_bytes(frame[:4], "big") == len(frame) - 4

    def test_declared_length_longer_than_body(self):
        frame = (100).to_bytes(4, "big") + b"x" * 50
        with pytest.raises(pr.LengthMismatch):
            pr.decode_frame(frame)

    def test_declared_length_shorter_than_body(self):
        frame = (10).to_bytes(4, "big") + b"y" * 50
        with pytest.raises(pr.LengthMismatch):
            pr.decode_frame(frame)

    def test_truncated_prefix(self):
        with pytest.raises(pr.LengthMismatch):
            pr.decode_frame(b"\x00\x01")

    def test_unknown_kind(self):
        bad = pr.encode_frame(env())
        body = bad[4:].replace(b'"kind":"Ping"', b'"kind":"Teleport2"')
        frame = len(body).to_bytes(4, "big") + body
        with pytest.raises(pr.UnknownKind):
            pr.decode_frame(frame)

    def test_malformed_json(self):
        body = b'{"kind": "Ping", '
        with pytest.raises(pr.MalformedBody):
            pr.decode_frame(len(body).to_bytes(4, "big") + body)

    def test_non_object_body(self):
        body = b'[1,2,3]'
        with pytest.raises(pr.MalformedBody):
            pr.decode_frame(len(body).to_bytes(4, "big") + body)

    def test_missing_fields(self):
        body = b'{"kind":"Ping","payload":{}}'
        with pytest.raises(pr.MalformedBody):
            pr.decode_frame(len(body).to_bytes(4, "big") + body)

    def test_fuzz_random_bytes_always_classified(self):
        rng = random.Random(0xF00D)
        outcomes = {"ok": 0, "LengthMismatch": 0, "UnknownKind": 0, "MalformedBody": 0}
        for _ in range(20_000):
            n = rng.randint(0, 64)
            data = rng.randbytes(n)
            if rng.random() < 0.5 and n >= 4:
                # force a consistent prefix to reach the parser more often
                data = (n - 4).to_bytes(4, "big") + data[4:]
            try:
                pr.decode_frame(data)
                outcomes["ok"] += 1
            except pr.FrameError as e:
                outcomes[type(e).__name__] += 1
        assert outcomes["LengthMismatch"] > 0
        assert outcomes["MalformedBody"] > 0


class TestAuthority:
    def command(self, body):
        return sc.Command("c", "x", body)

    def test_coach_all_modes_all_bodies(self):
        bodies = [sc.SpawnEntity(sc.Entity(id="p")), sc.SetMode("Review"),
                  sc.AddAnnotation(sc.Annotation("a", sc.Marker((0, 0)))),
                  sc.PlayerPose("p", sc.Pose())]
        for mode in sc.MODES:
            for b in bodies:
                assert pr.authority_check(pr.COACH, mode, self.command(b)) is None

    def test_player_pose_in_lecture_denied(self):
        role = pr.Role("Player", "p7")
        cmd = self.command(sc.PlayerPose("p7", sc.Pose()))
        assert pr.authority_check(role, "Lecture", cmd) == pr.AUTHORITY_ERROR

    def test_player_pose_wrong_entity_denied(self):
        role = pr.Role("Player", "p7")
        cmd = self.command(sc.PlayerPose("p9", sc.Pose()))
        assert pr.authority_check(role, "Rehearsal", cmd) == pr.AUTHORITY_ERROR

    def test_player_own_pose_in_rehearsal_and_review(self):
        role = pr.Role("Player", "p7")
        cmd = self.command(sc.PlayerPose("p7", sc.Pose()))
        for mode in ("Rehearsal", "Review"):
            assert pr.authority_check(role, mode, cmd) is None

    def test_player_other_bodies_denied(self):
        role = pr.Role("Player", "p7")
        for body in (sc.SpawnEntity(sc.Entity(id="q")), sc.SetMode("Review"),
                     sc.RemoveEntity("p7"), sc.RetargetEntity("p7", (1, 1))):
            assert pr.authority_check(role, "Rehearsal", self.command(body)) is not None

    def test_observer_denied_everything(self):
        for mode in sc.MODES:
            for body in (sc.SetMode("Lecture"), sc.PlayerPose("p", sc.Pose())):
                assert pr.authority_check(pr.OBSERVER, mode, self.command(body)) is not None

    def test_fuzzed_triples_deny_is_sound(self):
        # property: every (role, mode, body) outcome is Allow or a reason,
        # and Player allows only the single permitted triple shape
        rng = random.Random(8)
        roles = [pr.COACH, pr.OBSERVER, pr.Role("Player", "p1"), pr.Role("Player", "p2")]
        bodies = [sc.PlayerPose("p1", sc.Pose()), sc.PlayerPose("p2", sc.Pose()),
                  sc.SetMode("Review"), sc.RemoveEntity("p1"),
                  sc.TeleportEntity("p1", sc.Pose())]
        for _ in range(500):
            role = rng.choice(roles)
            mode = rng.choice(sc.MODES)
            body = rng.choice(bodies)
            verdict = pr.authority_check(role, mode, self.command(body))
            if role.kind == "Coach":
                assert verdict is None
            elif role.kind == "Observer":
                assert verdict is not None
            else:
                expected_allow = (isinstance(body, sc.PlayerPose)
                                  and body.id == role.entity_id
                                  and mode in ("Rehearsal", "Review"))
                assert (verdict is None) == expected_allow


class TestClockOffset:
    def test_formula(self):
        s = pr.ClockSample(100, 150, 120)
        assert s.offset == 40.0
        assert pr.estimate_clock_offset([s]) == 40.0

    def test_zero(self):
        s = pr.ClockSample(50, 50, 50)
        assert pr.estimate_clock_offset([s]) == 0.0

    def test_median_rejects_outlier(self):
        samples = [pr.ClockSample(0, 40, 0), pr.ClockSample(0, 42, 0),
                   pr.ClockSample(0, 1000, 0)]
        assert pr.estimate_clock_offset(samples) == 42.0

    def test_window_uses_most_recent_nine(self):
        old = [pr.ClockSample(0, 1000, 0)] * 5
        recent = [pr.ClockSample(0, float(v), 0) for v in (1, 2, 3, 4, 5, 6, 7, 8, 9)]
        assert pr.estimate_clock_offset(old + recent) == 5.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pr.estimate_clock_offset([])


class TestSessionLifecycle:
    def test_coach_start(self):
        state = pr.session_transition(pr.SessionState(), pr.StartSession(pr.COACH))
        assert state.phase == "Active" and state.mode == "Lecture"
        assert pr.commands_accepted(state)

    def test_observer_cannot_start(self):
        with pytest.raises(pr.InvalidTransition):
            pr.session_transition(pr.SessionState(), pr.StartSession(pr.OBSERVER))

    def test_set_mode(self):
        state = pr.session_transition(pr.SessionState(), pr.StartSession(pr.COACH))
        state = pr.session_transition(state, pr.SetSessionMode("Rehearsal"))
        assert state.phase == "Active" and state.mode == "Rehearsal"

    def test_mode_change_requires_active(self):
        with pytest.raises(pr.InvalidTransition):
            pr.session_transition(pr.SessionState(), pr.SetSessionMode("Review"))

    def test_coach_disconnect_pauses_commands_but_stays_active(self):
        state = pr.session_transition(pr.SessionState(), pr.StartSession(pr.COACH))
        state = pr.session_transition(state, pr.CoachDisconnected())
        assert state.phase == "Active"
        assert not pr.commands_accepted(state)
        state = pr.session_transition(state, pr.CoachReconnected())
        assert pr.commands_accepted(state)

    def test_joins_and_leaves_never_change_mode(self):
        state = pr.session_transition(pr.SessionState(), pr.StartSession(pr.COACH))
        state = pr.session_transition(state, pr.SetSessionMode("Review"))
        for event in (pr.ClientJoined(pr.OBSERVER), pr.ClientLeft(pr.OBSERVER),
                      pr.ClientJoined(pr.Role("Player", "p1"))):
            state = pr.session_transition(state, event)
            assert state.mode == "Review"

    def test_coach_ends(self):
        state = pr.session_transition(pr.SessionState(), pr.StartSession(pr.COACH))
        state = pr.session_transition(state, pr.EndSession(pr.COACH))
        assert state.phase == "Ended"
        assert not pr.commands_accepted(state)


class TestResolveGap:
    def test_apply(self):
        assert pr.resolve_gap(7, 8) is pr.GapAction.APPLY

    def test_drop(self):
        assert pr.resolve_gap(7, 5) is pr.GapAction.DROP

    def test_request_snapshot(self):
        assert pr.resolve_gap(7, 12) is pr.GapAction.REQUEST_SNAPSHOT


class TestRole:
    def test_round_trip(self):
        for r in (pr.COACH, pr.OBSERVER, pr.Role("Player", "p3")):
            assert pr.role_from_dict(pr.role_to_dict(r)) == r

    def test_player_requires_entity(self):
        with pytest.raises(ValueError):
            pr.Role("Player")

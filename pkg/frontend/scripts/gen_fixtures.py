#!/usr/bin/env python3
"""Generate cross-language fixtures for the board's test suite.

Every vector is produced by the server package, so the TypeScript side is
checked against the authoritative implementation: canonical float rendering,
scene hashing, frame bytes, the projection reference, and a full scripted
session for the mirror-fidelity test.
"""

import io
import json
import math
import os
import random
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from panocoach import geometry as geo  # noqa: E402
from panocoach import motion, netsim  # noqa: E402
from panocoach import scene as sc  # noqa: E402
from panocoach.protocol import Envelope, encode_frame  # noqa: E402
from panocoach.session import ServerConfig, SessionCore  # noqa: E402

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def write(name, obj):
    path = os.path.join(OUT_DIR, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, ensure_ascii=True)
    print(f"wrote {name}")


def float_cases():
    rng = random.Random(1234)
    texts = ["0", "-0.0000001", "0.1", "-0.1", "1", "105", "68", "52.5", "-34",
             "0.000001", "-0.000001", "0.0000015", "0.00001", "0.0001",
             "0.00012345", "2.5e-05", "9.9e-05", "0.123456499", "0.1234565",
             "0.12345649999", "1e-07", "4.9e-07", "5.1e-07", "3.14159265358979",
             "-1.5707963267948966", "1234567.654321", "999999.9999995",
             "8.0", "-0.5", "16.999999", "17.0000004", "0.0078125", "-0.0078125",
             "123.4567891", "1e15", "123456789.123456789"]
    for _ in range(300):
        texts.append(repr(rng.uniform(-60, 60)))
    for _ in range(100):
        texts.append(repr(rng.uniform(-1e-4, 1e-4)))
    for _ in range(50):
        texts.append(repr(rng.uniform(-math.pi, math.pi)))
    cases = []
    for t in texts:
        x = float(t)
        v = round(x, 6)
        if v == 0:
            v = 0.0
        cases.append({"text": t, "rounded_repr": repr(v)})
    return {"cases": cases}


def rich_scene():
    scene = sc.initial_scene()
    now = 0

    def apply(body, cid):
        nonlocal scene, now
        now += 40
        scene, _ = sc.apply_command(scene, sc.Command(cid, "coach", body), now)

    apply(sc.SpawnEntity(sc.Entity(id="p1", kind="Player", team="Home",
                                   label="Nuñez ⚽", pose=sc.Pose(-10.25, 4.5, 0, 0.75),
                                   height_m=1.83, speed_mps=0.0)), "c1")
    apply(sc.SpawnEntity(sc.Entity(id="p2", kind="Player", team="Away",
                                   label="p\ttwo", pose=sc.Pose(7.125, -3.0, 0, -2.5))), "c2")
    apply(sc.SpawnEntity(sc.Entity(id="ball", kind="Ball",
                                   pose=sc.Pose(0.000001, -0.0000001, 0, 0),
                                   height_m=0.22)), "c3")
    apply(sc.AddAnnotation(sc.Annotation("a1", sc.Arrow3D((0, 0, 0), (10.5, 5.25, 3.0)),
                                         priority=4)), "c4")
    apply(sc.AddAnnotation(sc.Annotation("a2", sc.Zone(((1, 1), (8, 1), (8, 6), (1, 6))),
                                         priority=1)), "c5")
    apply(sc.AddAnnotation(sc.Annotation("a3", sc.Marker((-20.5, 10.0), "press here →"),
                                         priority=9)), "c6")
    apply(sc.AddAnnotation(sc.Annotation("a4", sc.Polyline(((0, 0), (5, 2.5), (10, -1))),
                                         priority=0)), "c7")
    apply(sc.SetMode("Rehearsal"), "c8")
    apply(sc.RetargetEntity("p1", (12.345678901, -7.5)), "c9")
    seq = motion.TacticSequence(
        id="drill", name="give and go",
        tracks={"p1": ((0, -10.25, 4.5), (1200, 0.0, 0.0)),
                "p2": ((0, 7.125, -3.0), (800, 9.0, 0.5), (1600, 2.0, 2.0))},
        warnings=(motion.TransitionWarning("p1", "p2", 0.876543219, 640),))
    apply(sc.LoadSequence(seq), "c10")
    apply(sc.PlaybackControl("play", rate=1.5), "c11")
    return scene


def canonical_scene():
    scene = rich_scene()
    return {
        "scene": sc.scene_to_dict(scene),
        "canonical": sc.canonical_scene_json(scene),
        "hash": sc.scene_hash(scene),
        "empty_canonical": sc.canonical_scene_json(sc.initial_scene()),
        "empty_hash": sc.scene_hash(sc.initial_scene()),
    }


def golden_ndc():
    scene = sc.initial_scene()
    now = 0

    def apply(body, cid):
        nonlocal scene, now
        now += 25
        scene, _ = sc.apply_command(scene, sc.Command(cid, "coach", body), now)

    apply(sc.SpawnEntity(sc.Entity(id="viewer", kind="Player", team="Home",
                                   pose=sc.Pose(-5.0, 2.0, 0.0, 0.35), height_m=1.8)), "v")
    placements = [
        ("p2", sc.Pose(6.0, 4.0, 0.0, 1.2), 1.75),
        ("p3", sc.Pose(-14.0, 2.0, 0.0, 0.0), 1.9),   # behind the viewer
        ("p4", sc.Pose(10.0, 30.0, 0.0, -0.4), 1.7),  # far off to the side
        ("p5", sc.Pose(2.0, 3.5, 0.0, 2.0), 1.68),
    ]
    for eid, pose, h in placements:
        apply(sc.SpawnEntity(sc.Entity(id=eid, kind="Player", team="Away",
                                       pose=pose, height_m=h)), eid)
    apply(sc.SpawnEntity(sc.Entity(id="ball", kind="Ball",
                                   pose=sc.Pose(1.0, 2.5, 0, 0), height_m=0.22)), "b")
    apply(sc.AddAnnotation(sc.Annotation("near", sc.Marker((3.0, 3.0), "x"),
                                         priority=2)), "a1")
    apply(sc.AddAnnotation(sc.Annotation("zone", sc.Zone(((5, 0), (9, 0), (9, 5), (5, 5))),
                                         priority=2)), "a2")
    apply(sc.AddAnnotation(sc.Annotation("arrow", sc.Arrow3D((0, 0, 0), (6, 3, 2.5)),
                                         priority=5)), "a3")
    for i in range(6):
        apply(sc.AddAnnotation(sc.Annotation(
            f"noise{i}", sc.Marker((-20.0 - i, -15.0)), priority=0)), f"n{i}")

    cam = geo.CameraParams()
    viewer = scene.entities["viewer"].pose
    entries = []
    for eid in sorted(scene.entities):
        if eid == "viewer":
            continue
        ent = scene.entities[eid]
        for part, z in (("foot", ent.pose.z), ("head", ent.pose.z + ent.height_m)):
            ndc = geo.fpv_project(viewer, cam, (ent.pose.x, ent.pose.y, z))
            entries.append({"entity": eid, "part": part, "ndc": _ndc(ndc)})
    visible = geo.select_visible_annotations(scene.annotations.values(), viewer,
                                             n_max=geo.DEFAULT_N_MAX)
    for a in visible:
        if isinstance(a.shape, sc.Arrow3D):
            pts = [a.shape.start, a.shape.end]
        else:
            pts = [(x, y, 0.0) for x, y in sc.shape_ground_points(a.shape)]
        for i, p in enumerate(pts):
            ndc = geo.fpv_project(viewer, cam, p)
            entries.append({"annotation": a.id, "vertex": i, "ndc": _ndc(ndc)})
    return {
        "scene": sc.scene_to_dict(scene),
        "viewer_entity": "viewer",
        "camera": {"eye_height_m": cam.eye_height_m, "hfov_rad": cam.hfov_rad,
                   "aspect": cam.aspect, "near_m": cam.near_m,
                   "pitch_rad": cam.pitch_rad},
        "n_max": geo.DEFAULT_N_MAX,
        "visible_annotations": [a.id for a in visible],
        "entries": entries,
    }


def _ndc(ndc):
    return None if ndc is None else {"x": ndc.x, "y": ndc.y, "depth_m": ndc.depth_m}


def session50():
    config = ServerConfig()
    core = SessionCore(config)
    cid = core.connect(0)
    welcome = core.on_frame(cid, Envelope("Hello", "", 0,
                                          {"desired_role": "Coach"}), 0)[0][1]
    deltas = []

    def collect(outgoing):
        for target, env in outgoing:
            if target == cid and env.kind == "Delta":
                deltas.append({"seq": env.payload["seq"],
                               "session_time_ms": env.session_time_ms,
                               "effect": env.payload["effect"]})

    script = netsim.generate_script(77, 50, include_playback=True)
    tick, n = 0.0, 0
    events = [(float(t), i, ("cmd", body)) for i, (t, body) in enumerate(script)]
    end = max(t for t, _ in script)
    while tick <= end + 12000:
        events.append((tick, 10**6 + n, ("tick", None)))
        tick += 1000.0 / config.tick_hz
        n += 1
    events.sort(key=lambda e: (e[0], e[1]))
    for when, _, (kind, body) in events:
        now = int(when)
        if kind == "cmd":
            collect(core.on_frame(cid, Envelope("Command", "", 0, {
                "command_id": f"fix-{len(deltas)}-{now}",
                "body": sc.command_body_to_dict(body)}), now))
        else:
            collect(core.on_tick(now))
            if when > end and core.quiescent():
                break
    assert core.quiescent()
    return {
        "snapshot": welcome.payload["snapshot"],
        "snapshot_seq": welcome.payload["seq"],
        "deltas": deltas,
        "command_count": len(script),
        "final_hash": sc.scene_hash(core.scene),
        "final_version": core.scene.version,
    }


def frames():
    envs = [
        Envelope("Ping", "c1", 123, {"t0": 5}),
        Envelope("Hello", "", 0, {"desired_role": "Player", "entity_id": "p7"}),
        Envelope("Delta", "server", 4567,
                 {"seq": 9, "effect": {"kind": "PoseUpdate", "id": "p7",
                                       "pose": {"x": 1.5, "y": -2.25, "z": 0.0,
                                                "yaw": 0.7853981633974483},
                                       "cancel_plan": False}},
                 seq=9),
        Envelope("Reject", "server", 99, {"command_id": "c-1",
                                          "reason": "AuthorityError"}),
        Envelope("Command", "c2", 50,
                 {"command_id": "c2-1",
                  "body": {"kind": "AddAnnotation",
                           "annotation": {"id": "a1",
                                          "shape": {"kind": "Marker",
                                                    "point": [1.0, 2.0],
                                                    "text": "héllo ⚽"},
                                          "priority": 3, "created_at": 0,
                                          "author": ""}}}),
    ]
    return {"frames": [{"hex": encode_frame(e).hex(),
                        "envelope": {"kind": e.kind, "sender": e.sender,
                                     "session_time_ms": e.session_time_ms,
                                     "payload": e.payload,
                                     **({"seq": e.seq} if e.seq is not None else {})}}
                       for e in envs]}


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    write("canonical_cases.json", float_cases())
    write("canonical_scene.json", canonical_scene())
    write("golden_ndc.json", golden_ndc())
    write("session50.json", session50())
    write("frames.json", frames())


if __name__ == "__main__":
    main()

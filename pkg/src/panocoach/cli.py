"""Command line entry points.

    panocoach server  --port 8080 --pitch 105x68 --record out.log --tick 30
    panocoach replay  --log out.log --verify
    panocoach replay  --log out.log --serve --port 8081 --rate 2.0
    panocoach plan    --from a.formation --to b.formation --vmax 8 -o drill.sequence
    panocoach deviate --planned drill.sequence --actual out.log --entity p7 --tau 2.0
    panocoach sim     --clients 8 --latency-ms 200 --jitter-ms 50 --loss 0.05 \
                      --script drill.script --seed 42
    panocoach script  --seed 42 -n 100 -o drill.script
    panocoach ndc     --scene scene.json --entity p7

Reports print as delimited text; --fig renders the matching figure to a file.
PANOCOACH_LOG_LEVEL in {error,warn,info,debug} controls logging.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys

from . import geometry as geo
from . import motion, netsim
from . import scene as sc
from .session import ServerConfig, replay_log
from .sessionlog import read_log

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("PANOCOACH_LOG_LEVEL", "info").lower()
    if level not in LOG_LEVELS:
        print(f"warning: PANOCOACH_LOG_LEVEL={level!r} not in "
              f"{sorted(LOG_LEVELS)}, using info", file=sys.stderr)
        level = "info"
    logging.basicConfig(level=LOG_LEVELS[level],
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def parse_pitch(text: str) -> sc.PitchSpec:
    try:
        length, width = text.lower().split("x")
        return sc.PitchSpec(float(length), float(width))
    except (ValueError, sc.InvalidGeometry) as e:
        raise argparse.ArgumentTypeError(f"bad pitch {text!r}: {e}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="panocoach",
                                description="tactic coaching session server and tools")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("server", help="host a live coaching session")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--host", default="0.0.0.0")
    s.add_argument("--pitch", type=parse_pitch, default=sc.PitchSpec(),
                   metavar="LxW", help="pitch dimensions in meters (default 105x68)")
    s.add_argument("--record", metavar="PATH", help="append the session log here")
    s.add_argument("--tick", type=int, default=30, help="plan/playback tick rate")
    s.add_argument("--vmax", type=float, default=motion.DEFAULT_V_MAX)

    r = sub.add_parser("replay", help="verify or serve a recorded session log")
    r.add_argument("--log", required=True)
    mode = r.add_mutually_exclusive_group(required=True)
    mode.add_argument("--verify", action="store_true",
                      help="re-apply every record and print the final scene hash")
    mode.add_argument("--serve", action="store_true",
                      help="host the log read-only for observers")
    r.add_argument("--port", type=int, default=8081)
    r.add_argument("--host", default="0.0.0.0")
    r.add_argument("--rate", type=float, default=1.0)

    g = sub.add_parser("plan", help="generate a formation-transition drill")
    g.add_argument("--from", dest="from_file", required=True, metavar="FORMATION")
    g.add_argument("--to", dest="to_file", required=True, metavar="FORMATION")
    g.add_argument("--vmax", type=float, default=motion.DEFAULT_V_MAX)
    g.add_argument("--rmin", type=float, default=1.0,
                   help="minimum pass distance before staggering (m)")
    g.add_argument("-o", "--out", required=True, metavar="SEQUENCE")
    g.add_argument("--fig", metavar="PNG", help="render the drill to an image")

    d = sub.add_parser("deviate", help="compare recorded movement against a drill")
    d.add_argument("--planned", required=True, metavar="SEQUENCE")
    d.add_argument("--actual", required=True, metavar="LOG")
    d.add_argument("--entity", required=True)
    d.add_argument("--tau", type=float, default=2.0,
                   help="on-plan distance threshold (m)")
    d.add_argument("--t0", type=int, default=None,
                   help="session ms when the drill started "
                        "(default: first recorded sample)")
    d.add_argument("--source", choices=["relay", "all"], default="relay",
                   help="use player pose relays only, or every pose record")
    d.add_argument("--fig", metavar="PNG")

    m = sub.add_parser("sim", help="run a deterministic network scenario")
    m.add_argument("--clients", type=int, default=8)
    m.add_argument("--latency-ms", type=float, default=0.0)
    m.add_argument("--jitter-ms", type=float, default=0.0)
    m.add_argument("--loss", type=float, default=0.0)
    m.add_argument("--script", metavar="PATH",
                   help="line-delimited {t, command} records")
    m.add_argument("--gen", type=int, metavar="N",
                   help="generate an N-command script from --seed instead")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--timeout-ms", type=float, default=netsim.DEFAULT_TIMEOUT_MS)
    m.add_argument("--tick", type=int, default=30)
    m.add_argument("--fig", metavar="PNG")

    w = sub.add_parser("script", help="write a seeded scripted command stream")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("-n", "--commands", type=int, default=100)
    w.add_argument("--playback", action="store_true",
                   help="include sequence load/playback commands")
    w.add_argument("-o", "--out", required=True)

    n = sub.add_parser("ndc", help="emit the projection reference for a scene "
                                   "(debug endpoint for UI golden tests)")
    n.add_argument("--scene", required=True, metavar="JSON")
    n.add_argument("--entity", required=True, help="viewer entity id")
    n.add_argument("--eye-height", type=float, default=1.7)
    n.add_argument("--hfov-rad", type=float, default=geo.CameraParams().hfov_rad)
    n.add_argument("--aspect", type=float, default=16.0 / 9.0)
    n.add_argument("--near", type=float, default=0.1)
    n.add_argument("--pitch-rad", type=float, default=0.0)
    n.add_argument("--n-max", type=int, default=geo.DEFAULT_N_MAX)
    return p


def cmd_server(args) -> int:
    from .wsserver import BindFailure, run_session
    config = ServerConfig(port=args.port, pitch=args.pitch,
                          record_path=args.record, tick_hz=args.tick,
                          v_max=args.vmax)
    try:
        asyncio.run(run_session(config, host=args.host))
    except KeyboardInterrupt:
        print("session ended")
    except BindFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def cmd_replay(args) -> int:
    from .sessionlog import CorruptLog
    try:
        log = read_log(args.log)
    except (OSError, CorruptLog) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.verify:
        try:
            digest = replay_log(log, mode="verify")
        except CorruptLog as e:
            print(f"corrupt log: {e}", file=sys.stderr)
            return 1
        print(f"records={len(log.records)}")
        print(f"final_hash={digest}")
        return 0
    from .wsserver import BindFailure, run_replay_session
    try:
        asyncio.run(run_replay_session(log, args.rate, args.port, host=args.host))
    except KeyboardInterrupt:
        print("replay ended")
    except BindFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def cmd_plan(args) -> int:
    with open(args.from_file, encoding="utf-8") as fh:
        start, pitch_dims = motion.formation_from_json(fh.read())
    with open(args.to_file, encoding="utf-8") as fh:
        goal, goal_pitch = motion.formation_from_json(fh.read())
    if goal_pitch != pitch_dims:
        print(f"warning: target formation uses a {goal_pitch[0]:g}x{goal_pitch[1]:g} "
              f"pitch; using {pitch_dims[0]:g}x{pitch_dims[1]:g}", file=sys.stderr)
    try:
        seq = motion.generate_transition(start, goal, v_max=args.vmax,
                                         r_min=args.rmin, pitch=pitch_dims,
                                         sequence_id=os.path.basename(args.out))
    except (motion.CountMismatch, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(motion.sequence_to_json(seq, pitch_dims))
    print(f"tracks={len(seq.tracks)}")
    print(f"duration_ms={seq.duration_ms}")
    print(f"warnings={len(seq.warnings)}")
    for w in seq.warnings:
        print(f"{w.a}\t{w.b}\t{w.min_distance_m:.3f}\t{w.t_ms}")
    if args.fig:
        from .figures import transition_figure
        transition_figure(seq, start, goal, sc.PitchSpec(*pitch_dims), args.fig)
        print(f"figure={args.fig}")
    return 0


def _actual_samples(log, entity: str, source: str):
    kinds = {"pose_relay"} if source == "relay" else {"pose_relay", "delta"}
    samples = []
    for rec in log.records:
        if rec.kind not in kinds:
            continue
        eff = rec.effect
        if isinstance(eff, sc.PoseUpdate) and eff.id == entity:
            samples.append((rec.session_time_ms, eff.pose.x, eff.pose.y))
    return samples


def cmd_deviate(args) -> int:
    with open(args.planned, encoding="utf-8") as fh:
        seq = motion.sequence_from_json(fh.read())
    if args.entity not in seq.tracks:
        print(f"error: no planned track for {args.entity!r}", file=sys.stderr)
        return 1
    log = read_log(args.actual)
    samples = _actual_samples(log, args.entity, args.source)
    if not samples:
        print(f"error: no recorded movement for {args.entity!r} in {args.actual}",
              file=sys.stderr)
        return 1
    t0 = args.t0 if args.t0 is not None else samples[0][0]
    rebased = [(t - t0, x, y) for t, x, y in samples if t >= t0]
    report = motion.path_deviation(seq, rebased, args.tau, entity_id=args.entity)
    print("entity\tmean_m\tmax_m\trms_m\ton_plan_fraction\tsample_count")
    print(f"{report.entity_id}\t{report.mean_m:.6f}\t{report.max_m:.6f}"
          f"\t{report.rms_m:.6f}\t{report.on_plan_fraction:.4f}\t{report.sample_count}")
    if args.fig:
        from .figures import deviation_figure
        planned = [(t, x, y) for t, x, y in seq.tracks[args.entity]]
        deviation_figure(report, planned, rebased, args.tau, log.pitch, args.fig)
        print(f"figure={args.fig}")
    return 0


def cmd_sim(args) -> int:
    if args.script:
        with open(args.script, encoding="utf-8") as fh:
            script = netsim.script_from_json_lines(fh.read())
    elif args.gen:
        script = netsim.generate_script(args.seed, args.gen)
    else:
        print("error: provide --script PATH or --gen N", file=sys.stderr)
        return 1
    link = netsim.LinkModel(latency_mean_ms=args.latency_ms,
                            latency_jitter_ms=args.jitter_ms,
                            loss_prob=args.loss, seed=args.seed)
    report = netsim.run_scenario(link, args.clients, script,
                                 timeout_ms=args.timeout_ms, tick_hz=args.tick,
                                 collect_trace=bool(args.fig))
    for line in report.lines():
        print(line)
    if args.fig:
        from .figures import convergence_figure
        convergence_figure(report, args.fig,
                           last_command_ms=max(t for t, _ in script))
        print(f"figure={args.fig}")
    return 0 if report.converged else 2


def cmd_script(args) -> int:
    script = netsim.generate_script(args.seed, args.commands,
                                    include_playback=args.playback)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(netsim.script_to_json_lines(script))
    print(f"commands={len(script)}")
    print(f"out={args.out}")
    return 0


def cmd_ndc(args) -> int:
    with open(args.scene, encoding="utf-8") as fh:
        scene = sc.scene_from_dict(json.load(fh))
    viewer_ent = scene.entities.get(args.entity)
    if viewer_ent is None or viewer_ent.kind != "Player":
        print(f"error: {args.entity!r} is not a player entity", file=sys.stderr)
        return 1
    cam = geo.CameraParams(eye_height_m=args.eye_height, hfov_rad=args.hfov_rad,
                           aspect=args.aspect, near_m=args.near,
                           pitch_rad=args.pitch_rad)
    viewer = viewer_ent.pose
    entries = []
    for eid in sorted(scene.entities):
        if eid == args.entity:
            continue
        ent = scene.entities[eid]
        for part, z in (("foot", ent.pose.z), ("head", ent.pose.z + ent.height_m)):
            ndc = geo.fpv_project(viewer, cam, (ent.pose.x, ent.pose.y, z))
            entries.append({"entity": eid, "part": part, "ndc": _ndc_dict(ndc)})
    visible = geo.select_visible_annotations(
        scene.annotations.values(), viewer, n_max=args.n_max)
    for ann in visible:
        pts = _annotation_points(ann)
        for i, point in enumerate(pts):
            ndc = geo.fpv_project(viewer, cam, point)
            entries.append({"annotation": ann.id, "vertex": i, "ndc": _ndc_dict(ndc)})
    out = {"viewer": {"entity": args.entity, "pose": sc.pose_to_dict(viewer)},
           "camera": {"eye_height_m": cam.eye_height_m, "hfov_rad": cam.hfov_rad,
                      "aspect": cam.aspect, "near_m": cam.near_m,
                      "pitch_rad": cam.pitch_rad},
           "visible_annotations": [a.id for a in visible],
           "entries": entries}
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _ndc_dict(ndc):
    if ndc is None:
        return None
    return {"x": ndc.x, "y": ndc.y, "depth_m": ndc.depth_m}


def _annotation_points(ann: sc.Annotation):
    shape = ann.shape
    if isinstance(shape, sc.Arrow3D):
        return [shape.start, shape.end]
    return [(x, y, 0.0) for x, y in sc.shape_ground_points(shape)]


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    handlers = {"server": cmd_server, "replay": cmd_replay, "plan": cmd_plan,
                "deviate": cmd_deviate, "sim": cmd_sim, "script": cmd_script,
                "ndc": cmd_ndc}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

"""Deterministic in-process network simulator.

A discrete-event loop drives one SessionCore and a set of ClientCore
observers over virtual links with seeded latency/jitter/loss.  A scripted
coach on an ideal link injects the command stream; the harness measures how
long after the last command every observer's scene hash matches the
server's.  No wall-clock sleeps anywhere, so results are bit-reproducible
per (seed, script, link).
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import scene as sc
from .client import ClientCore
from .protocol import Envelope, decode_frame, encode_frame
from .session import ServerConfig, SessionCore

DEFAULT_TIMEOUT_MS = 30_000
POLL_INTERVAL_MS = 100.0

Script = list[tuple[int, sc.CommandBody]]


@dataclass(frozen=True, slots=True)
class LinkModel:
    latency_mean_ms: float = 0.0
    latency_jitter_ms: float = 0.0
    loss_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.latency_mean_ms < 0 or self.latency_jitter_ms < 0:
            raise ValueError("latencies must be >= 0")
        if not (0.0 <= self.loss_prob <= 1.0):
            raise ValueError("loss_prob must be within [0, 1]")


def draw_latency(rng: random.Random, mean_ms: float, jitter_ms: float) -> float:
    """Normal latency truncated at zero (resampled, not clipped)."""
    if jitter_ms == 0:
        return mean_ms
    while True:
        d = rng.gauss(mean_ms, jitter_ms)
        if d >= 0.0:
            return d


@dataclass
class ConvergenceReport:
    converged: bool
    time_to_converge_ms: Optional[float]
    server_hash: str
    client_hashes: dict[str, str]
    messages_sent: int
    messages_dropped: int
    trace: list[tuple[float, str, int]] = field(default_factory=list, repr=False)

    def lines(self) -> list[str]:
        ttc = "" if self.time_to_converge_ms is None else f"{self.time_to_converge_ms:g}"
        out = [f"converged={str(self.converged).lower()}",
               f"time_to_converge_ms={ttc}",
               f"messages_sent={self.messages_sent}",
               f"messages_dropped={self.messages_dropped}",
               f"server_hash={self.server_hash}",
               "client\thash\tmatches"]
        for cid in sorted(self.client_hashes):
            h = self.client_hashes[cid]
            out.append(f"{cid}\t{h}\t{str(h == self.server_hash).lower()}")
        return out


def _link_rng(seed: int, index: int, direction: int) -> random.Random:
    return random.Random((seed * 1_000_003 + index * 7_919 + direction)
                         & 0xFFFFFFFFFFFFFFFF)


def run_scenario(link: LinkModel, n_clients: int, script: Script,
                 timeout_ms: float = DEFAULT_TIMEOUT_MS, *,
                 tick_hz: int = 30, pitch: Optional[sc.PitchSpec] = None,
                 v_max: float = 8.0, collect_trace: bool = False) -> ConvergenceReport:
    if not script:
        raise ValueError("script must be nonempty")
    if n_clients < 1:
        raise ValueError("need at least one client")

    config = ServerConfig(pitch=pitch or sc.PitchSpec(), tick_hz=tick_hz, v_max=v_max)
    core = SessionCore(config)
    coach = ClientCore("Coach")
    observers = [ClientCore("Observer") for _ in range(n_clients)]

    heap: list[tuple[float, int, Callable[[float], None]]] = []
    counter = itertools.count()

    def schedule(t: float, fn: Callable[[float], None]):
        heapq.heappush(heap, (t, next(counter), fn))

    up_rng = [_link_rng(link.seed, i, 0) for i in range(n_clients)]
    down_rng = [_link_rng(link.seed, i, 1) for i in range(n_clients)]
    sent = dropped = 0
    trace: list[tuple[float, str, int]] = []

    # Coach handshakes synchronously at t=0 so script commands are never
    # racing their own Welcome; it is harness machinery, not a measured link.
    coach_cid = core.connect(0)
    for _, env in core.on_frame(coach_cid, coach.hello_frame(0), 0):
        coach.on_frame(env, 0)

    observer_cid: dict[str, int] = {}
    cids: list[str] = []
    for i in range(n_clients):
        cid = core.connect(0)
        observer_cid[cid] = i
        cids.append(cid)

    def deliver_to_server(cid: str, frame: bytes, now: float):
        env = decode_frame(frame)
        route(core.on_frame(cid, env, int(now)), now)

    def deliver_to_observer(i: int, frame: bytes, now: float):
        env = decode_frame(frame)
        for reply in observers[i].on_frame(env, int(now)):
            send_up(i, reply, now)
        if collect_trace and env.kind in ("Delta", "Snapshot", "Welcome"):
            trace.append((now, cids[i], observers[i].scene.version))

    def send_up(i: int, env: Envelope, now: float):
        nonlocal sent, dropped
        frame = encode_frame(env)
        sent += 1
        if link.loss_prob > 0 and up_rng[i].random() < link.loss_prob:
            dropped += 1
            return
        delay = draw_latency(up_rng[i], link.latency_mean_ms, link.latency_jitter_ms)
        cid = cids[i]
        schedule(now + delay, lambda t: deliver_to_server(cid, frame, t))

    def send_down(i: int, env: Envelope, now: float):
        nonlocal sent, dropped
        frame = encode_frame(env)
        sent += 1
        if link.loss_prob > 0 and down_rng[i].random() < link.loss_prob:
            dropped += 1
            return
        delay = draw_latency(down_rng[i], link.latency_mean_ms, link.latency_jitter_ms)
        schedule(now + delay, lambda t: deliver_to_observer(i, frame, t))

    def route(outgoing, now: float):
        for cid, env in outgoing:
            if cid == coach_cid:
                frame = encode_frame(env)
                schedule(now, lambda t, f=frame: coach.on_frame(decode_frame(f), int(t)))
            elif cid in observer_cid:
                send_down(observer_cid[cid], env, now)

    def tick(now: float):
        route(core.on_tick(int(now)), now)
        schedule(now + 1000.0 / tick_hz, tick)

    def poll(i: int, now: float):
        for env in observers[i].poll(int(now)):
            send_up(i, env, now)
        schedule(now + POLL_INTERVAL_MS, lambda t: poll(i, t))

    schedule(0.0, tick)
    for i in range(n_clients):
        schedule(0.0, lambda t, i=i: poll(i, t))
    for t_cmd, body in script:
        env = coach.command_frame(body, int(t_cmd))
        frame = encode_frame(env)
        schedule(float(t_cmd), lambda t, f=frame: deliver_to_server(coach_cid, f, t))

    last_script_ms = float(max(t for t, _ in script))
    converge_time: Optional[float] = None

    def converged_now() -> bool:
        if not core.quiescent():
            return False
        v = core.scene.version
        if any(o.scene.version != v for o in observers):
            return False
        server_hash = sc.scene_hash(core.scene)
        return all(sc.scene_hash(o.scene) == server_hash for o in observers)

    while heap:
        t, _, fn = heap[0]
        if t > timeout_ms:
            break
        heapq.heappop(heap)
        fn(t)
        if t >= last_script_ms and converged_now():
            converge_time = t
            break

    server_hash = sc.scene_hash(core.scene)
    hashes = {cids[i]: sc.scene_hash(o.scene) for i, o in enumerate(observers)}
    converged = converge_time is not None
    return ConvergenceReport(
        converged=converged,
        time_to_converge_ms=None if converge_time is None else converge_time - last_script_ms,
        server_hash=server_hash, client_hashes=hashes,
        messages_sent=sent, messages_dropped=dropped, trace=trace)


# -- scripted command streams --------------------------------------------------

def generate_script(seed: int, n_commands: int = 100,
                    pitch: Optional[sc.PitchSpec] = None,
                    include_playback: bool = False) -> Script:
    """Seeded, always-valid command stream: spawns first, then a mix of
    teleports, short retargets, annotations, and mode flips."""
    rng = random.Random(seed)
    p = pitch or sc.PitchSpec()
    half_l, half_w = p.length_m / 2 - 1, p.width_m / 2 - 1

    def point() -> tuple[float, float]:
        return (round(rng.uniform(-half_l, half_l), 3),
                round(rng.uniform(-half_w, half_w), 3))

    script: Script = []
    t = 0
    entities: dict[str, tuple[float, float]] = {}
    annotations: list[str] = []
    n_spawned = 0
    n_annot = 0
    n_players = min(n_commands, rng.randint(4, 8))
    sequence_loaded = False

    def spawn() -> sc.CommandBody:
        nonlocal n_spawned
        n_spawned += 1
        eid = f"p{n_spawned}"
        x, y = point()
        team = "Home" if n_spawned % 2 else "Away"
        entities[eid] = (x, y)
        return sc.SpawnEntity(sc.Entity(
            id=eid, kind="Player", team=team, label=eid.upper(),
            pose=sc.Pose(x, y, 0.0, round(rng.uniform(-math.pi, math.pi - 1e-9), 3))))

    for n in range(n_commands):
        t += rng.randint(20, 80)
        if n < n_players:
            script.append((t, spawn()))
            continue
        roll = rng.random()
        eids = sorted(entities)
        if roll < 0.30 and eids:
            eid = rng.choice(eids)
            x, y = point()
            entities[eid] = (x, y)
            body: sc.CommandBody = sc.TeleportEntity(eid, sc.Pose(x, y, 0.0, 0.0))
        elif roll < 0.55 and eids:
            eid = rng.choice(eids)
            x0, y0 = entities[eid]
            ang = rng.uniform(0, 2 * math.pi)
            r = rng.uniform(0.5, 4.0)
            x = min(half_l, max(-half_l, x0 + r * math.cos(ang)))
            y = min(half_w, max(-half_w, y0 + r * math.sin(ang)))
            entities[eid] = (x, y)
            body = sc.RetargetEntity(eid, (round(x, 3), round(y, 3)))
        elif roll < 0.75:
            n_annot += 1
            aid = f"a{n_annot}"
            annotations.append(aid)
            shape_roll = rng.random()
            if shape_roll < 0.3:
                shape: sc.Shape = sc.Arrow2D(point(), point())
            elif shape_roll < 0.5:
                shape = sc.Arrow3D((*point(), 0.0),
                                   (*point(), round(rng.uniform(0.0, 3.0), 3)))
            elif shape_roll < 0.7:
                shape = sc.Marker(point(), text=f"cue {n_annot}")
            elif shape_roll < 0.85:
                shape = sc.Polyline((point(), point(), point()))
            else:
                cx, cy = point()
                rad = rng.uniform(1.0, 4.0)
                shape = sc.Zone(tuple(
                    (round(cx + rad * math.cos(a), 3), round(cy + rad * math.sin(a), 3))
                    for a in (0.3, 1.8, 3.4, 5.0)))
            body = sc.AddAnnotation(sc.Annotation(
                id=aid, shape=shape, priority=rng.randint(0, 9)))
        elif roll < 0.82 and annotations:
            body = sc.RemoveAnnotation(annotations.pop(rng.randrange(len(annotations))))
        elif roll < 0.88:
            body = sc.SetMode(rng.choice(sc.MODES))
        elif include_playback and eids and not sequence_loaded and roll < 0.94:
            tracked = eids[:3]
            tracks = {}
            for eid in tracked:
                x0, y0 = entities[eid]
                x1, y1 = point()
                dur = rng.randint(400, 1500)
                tracks[eid] = ((0, x0, y0), (dur, x1, y1))
                entities[eid] = (x1, y1)
            seq = sc.TacticSequence(id=f"drill-{seed}", name=f"drill-{seed}",
                                    tracks=tracks)
            sequence_loaded = True
            body = sc.LoadSequence(seq)
        elif include_playback and sequence_loaded and roll < 0.97:
            body = sc.PlaybackControl("play", rate=rng.choice([0.5, 1.0, 2.0]))
        elif include_playback and sequence_loaded:
            body = sc.PlaybackControl(rng.choice(["pause", "stop", "seek"]),
                                      position_ms=rng.randint(0, 1500))
        else:
            body = spawn()
        script.append((t, body))
    return script


# -- script files ----------------------------------------------------------------

def script_to_json_lines(script: Script) -> str:
    return "\n".join(json.dumps({"t": t, "command": sc.command_body_to_dict(b)},
                                sort_keys=True)
                     for t, b in script) + "\n"


def script_from_json_lines(text: str) -> Script:
    script: Script = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        script.append((int(obj["t"]), sc.command_body_from_dict(obj["command"])))
    return script

"""Sans-io replication client: keeps a local scene mirror in lockstep with
the server by applying deltas in sequence order, falling back to snapshot
recovery on gaps or silence.

The browser board implements this same state machine; this one drives the
network simulator and the test suite.
"""

from __future__ import annotations

from typing import Optional

from . import scene as sc
from .protocol import (ClockSample, Envelope, GapAction, Role, estimate_clock_offset,
                       resolve_gap, role_from_dict)

IDLE_SNAPSHOT_MS = 600    # no broadcast for this long -> poll a snapshot
REQUEST_RETRY_MS = 500    # minimum spacing between snapshot requests
HELLO_RETRY_MS = 800      # re-offer Hello while the Welcome is missing
PING_INTERVAL_MS = 1000


class ClientCore:
    def __init__(self, desired_role: str = "Observer",
                 entity_id: Optional[str] = None, enable_ping: bool = False):
        self.desired_role = desired_role
        self.entity_id = entity_id
        self.enable_ping = enable_ping
        self.client_id: Optional[str] = None
        self.role: Optional[Role] = None
        self.scene = sc.initial_scene()
        self.welcomed = False
        self.rejects: list[dict] = []
        self.clock_samples: list[ClockSample] = []
        self._last_broadcast_ms: Optional[int] = None
        self._last_request_ms: Optional[int] = None
        self._last_hello_ms: Optional[int] = None
        self._last_ping_ms: Optional[int] = None
        self._next_command = 0

    # -- outbound ------------------------------------------------------------

    def _sender(self) -> str:
        return self.client_id or ""

    def hello_frame(self, now_ms: int) -> Envelope:
        self._last_hello_ms = now_ms
        payload = {"desired_role": self.desired_role}
        if self.entity_id is not None:
            payload["entity_id"] = self.entity_id
        return Envelope("Hello", self._sender(), 0, payload)

    def command_frame(self, body: sc.CommandBody, now_ms: int,
                      command_id: Optional[str] = None) -> Envelope:
        if command_id is None:
            self._next_command += 1
            command_id = f"{self._sender() or 'pre'}-{self._next_command}"
        return Envelope("Command", self._sender(), now_ms,
                        {"command_id": command_id,
                         "body": sc.command_body_to_dict(body)})

    def snapshot_request(self, now_ms: int) -> Envelope:
        self._last_request_ms = now_ms
        return Envelope("SnapshotRequest", self._sender(), now_ms, {})

    def ping_frame(self, now_ms: int) -> Envelope:
        self._last_ping_ms = now_ms
        return Envelope("Ping", self._sender(), now_ms, {"t0": now_ms})

    # -- inbound -------------------------------------------------------------

    def on_frame(self, env: Envelope, now_ms: int) -> list[Envelope]:
        if env.kind == "Welcome":
            self.client_id = str(env.payload["client_id"])
            self.role = role_from_dict(env.payload["role"])
            self.scene = sc.scene_from_dict(env.payload["snapshot"])
            self.welcomed = True
            self._last_broadcast_ms = now_ms
            return []
        if env.kind == "Delta":
            self._last_broadcast_ms = now_ms
            seq = int(env.payload["seq"])
            action = resolve_gap(self.scene.version, seq)
            if action is GapAction.APPLY:
                delta = sc.StateDelta(seq, env.session_time_ms,
                                      sc.effect_from_dict(env.payload["effect"]))
                self.scene = sc.apply_delta(self.scene, delta)
                return []
            if action is GapAction.DROP:
                return []
            if (self._last_request_ms is None
                    or now_ms - self._last_request_ms >= REQUEST_RETRY_MS):
                return [self.snapshot_request(now_ms)]
            return []
        if env.kind == "Snapshot":
            self._last_broadcast_ms = now_ms
            if int(env.payload["seq"]) >= self.scene.version:
                self.scene = sc.scene_from_dict(env.payload["scene"])
            return []
        if env.kind == "Pong":
            t0 = float(env.payload["t0"])
            t1 = float(env.payload["t1"])
            self.clock_samples.append(ClockSample(t0, t1, float(now_ms)))
            return []
        if env.kind == "Reject":
            self.rejects.append(dict(env.payload))
            return []
        return []

    # -- liveness ------------------------------------------------------------

    def poll(self, now_ms: int) -> list[Envelope]:
        """Periodic upkeep: re-offer Hello until welcomed, request a snapshot
        when the server has gone quiet (covers tail-loss of final deltas)."""
        out: list[Envelope] = []
        if not self.welcomed:
            if self._last_hello_ms is None or now_ms - self._last_hello_ms >= HELLO_RETRY_MS:
                out.append(self.hello_frame(now_ms))
            return out
        stale = (self._last_broadcast_ms is None
                 or now_ms - self._last_broadcast_ms >= IDLE_SNAPSHOT_MS)
        can_ask = (self._last_request_ms is None
                   or now_ms - self._last_request_ms >= REQUEST_RETRY_MS)
        if stale and can_ask:
            out.append(self.snapshot_request(now_ms))
        if self.enable_ping and (self._last_ping_ms is None
                                 or now_ms - self._last_ping_ms >= PING_INTERVAL_MS):
            out.append(self.ping_frame(now_ms))
        return out

    def clock_offset(self) -> float:
        return estimate_clock_offset(self.clock_samples)

    def scene_hash(self) -> str:
        return sc.scene_hash(self.scene)

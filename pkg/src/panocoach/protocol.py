"""Wire protocol: length-prefixed JSON envelopes over a binary transport,
role/mode authority rules, NTP-style clock offset estimation, the session
lifecycle state machine, and delta gap resolution.

Frame layout: 4-byte big-endian body length, then a UTF-8 JSON object with
sorted keys.  Kind and field names are case-sensitive and normative for all
clients.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Optional

from .scene import Command, PlayerPose

MESSAGE_KINDS = frozenset({
    "Hello", "Welcome", "Ping", "Pong", "Command", "Delta",
    "SnapshotRequest", "Snapshot", "Reject", "Bye",
})

CLOCK_WINDOW = 9  # samples in the median filter


class FrameError(Exception):
    pass


class LengthMismatch(FrameError):
    pass


class UnknownKind(FrameError):
    pass


class MalformedBody(FrameError):
    pass


class InvalidTransition(Exception):
    pass


@dataclass(frozen=True, slots=True)
class Envelope:
    kind: str
    sender: str
    session_time_ms: int
    payload: dict
    seq: Optional[int] = None


def encode_frame(env: Envelope) -> bytes:
    d: dict[str, Any] = {"kind": env.kind, "sender": env.sender,
                         "session_time_ms": env.session_time_ms,
                         "payload": env.payload}
    if env.seq is not None:
        d["seq"] = env.seq
    body = json.dumps(d, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return len(body).to_bytes(4, "big") + body


def decode_frame(data: bytes) -> Envelope:
    """Exact inverse of encode_frame.  Never reads past the declared length;
    any malformed input maps to a classified FrameError."""
    if len(data) < 4:
        raise LengthMismatch(f"frame too short for length prefix ({len(data)} bytes)")
    declared = int.from_bytes(data[:4], "big")
    if len(data) - 4 != declared:
        raise LengthMismatch(f"declared {declared} body bytes, got {len(data) - 4}")
    try:
        obj = json.loads(data[4:4 + declared].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedBody(str(e)) from None
    if not isinstance(obj, dict):
        raise MalformedBody("frame body must be a JSON object")
    kind = obj.get("kind")
    if not isinstance(kind, str):
        raise MalformedBody("missing kind")
    if kind not in MESSAGE_KINDS:
        raise UnknownKind(f"unknown message kind {kind!r}")
    sender = obj.get("sender")
    t = obj.get("session_time_ms")
    payload = obj.get("payload")
    seq = obj.get("seq")
    if (not isinstance(sender, str) or isinstance(t, bool) or not isinstance(t, int)
            or not isinstance(payload, dict)):
        raise MalformedBody("bad sender/session_time_ms/payload")
    if seq is not None and (isinstance(seq, bool) or not isinstance(seq, int)):
        raise MalformedBody("seq must be an integer")
    return Envelope(kind=kind, sender=sender, session_time_ms=t,
                    payload=payload, seq=seq)


# -- roles and authority --------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Role:
    kind: str  # Coach | Player | Observer
    entity_id: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("Coach", "Player", "Observer"):
            raise ValueError(f"unknown role {self.kind!r}")
        if self.kind == "Player" and not self.entity_id:
            raise ValueError("Player role must bind an entity")


COACH = Role("Coach")
OBSERVER = Role("Observer")

AUTHORITY_ERROR = "AuthorityError"


def role_to_dict(r: Role) -> dict:
    d: dict[str, Any] = {"role": r.kind}
    if r.entity_id is not None:
        d["entity_id"] = r.entity_id
    return d


def role_from_dict(d: dict) -> Role:
    return Role(str(d["role"]), d.get("entity_id"))


def authority_check(role: Role, mode: str, cmd: Command) -> Optional[str]:
    """None when allowed, else the deny reason.

    Coach: everything, in every mode.  Player: only its own avatar's pose,
    and only in Rehearsal/Review (in Lecture the coach drives all avatars).
    Observer: nothing.
    """
    if role.kind == "Coach":
        return None
    if role.kind == "Player":
        body = cmd.body
        if (isinstance(body, PlayerPose) and body.id == role.entity_id
                and mode in ("Rehearsal", "Review")):
            return None
        return AUTHORITY_ERROR
    return AUTHORITY_ERROR


# -- clock sync ------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ClockSample:
    t0: float  # client send (client clock)
    t1: float  # server receive/reply (server clock)
    t2: float  # client receive (client clock)

    def __post_init__(self):
        if self.t2 < self.t0:
            raise ValueError("t2 must be >= t0")

    @property
    def offset(self) -> float:
        return self.t1 - (self.t0 + self.t2) / 2.0


def estimate_clock_offset(samples: list[ClockSample], k: int = CLOCK_WINDOW) -> float:
    """Median sample offset over the most recent k round trips; the median
    rejects the asymmetric-latency outliers that a mean would absorb."""
    if not samples:
        raise ValueError("need at least one clock sample")
    recent = samples[-k:]
    return statistics.median(s.offset for s in recent)


# -- session lifecycle -----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class SessionState:
    phase: str = "Lobby"  # Lobby | Active | Ended
    mode: Optional[str] = None
    coach_connected: bool = False


@dataclass(frozen=True, slots=True)
class StartSession:
    role: Role


@dataclass(frozen=True, slots=True)
class SetSessionMode:
    mode: str


@dataclass(frozen=True, slots=True)
class EndSession:
    role: Role


@dataclass(frozen=True, slots=True)
class CoachDisconnected:
    pass


@dataclass(frozen=True, slots=True)
class CoachReconnected:
    pass


@dataclass(frozen=True, slots=True)
class ClientJoined:
    role: Role


@dataclass(frozen=True, slots=True)
class ClientLeft:
    role: Role


def session_transition(state: SessionState, event) -> SessionState:
    """Lobby --start(Coach)--> Active(Lecture); Active --SetMode--> Active(m);
    Active --end(Coach)--> Ended.  Joins/leaves never change the mode; a
    disconnected coach pauses command acceptance but keeps the session Active.
    """
    if isinstance(event, StartSession):
        if state.phase != "Lobby":
            raise InvalidTransition(f"cannot start from {state.phase}")
        if event.role.kind != "Coach":
            raise InvalidTransition("only the Coach can start a session")
        return SessionState(phase="Active", mode="Lecture", coach_connected=True)
    if isinstance(event, SetSessionMode):
        if state.phase != "Active":
            raise InvalidTransition("mode changes require an Active session")
        return replace(state, mode=event.mode)
    if isinstance(event, EndSession):
        if state.phase != "Active":
            raise InvalidTransition(f"cannot end from {state.phase}")
        if event.role.kind != "Coach":
            raise InvalidTransition("only the Coach can end a session")
        return replace(state, phase="Ended", coach_connected=False)
    if isinstance(event, CoachDisconnected):
        return replace(state, coach_connected=False)
    if isinstance(event, CoachReconnected):
        return replace(state, coach_connected=True)
    if isinstance(event, (ClientJoined, ClientLeft)):
        return state
    raise InvalidTransition(f"unknown event {event!r}")


def commands_accepted(state: SessionState) -> bool:
    return state.phase == "Active" and state.coach_connected


# -- gap resolution --------------------------------------------------------------

class GapAction(Enum):
    APPLY = "apply"
    DROP = "drop"
    REQUEST_SNAPSHOT = "request_snapshot"


def resolve_gap(client_version: int, incoming_seq: int) -> GapAction:
    if incoming_seq == client_version + 1:
        return GapAction.APPLY
    if incoming_seq <= client_version:
        return GapAction.DROP
    return GapAction.REQUEST_SNAPSHOT

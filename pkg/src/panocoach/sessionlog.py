"""Append-only session recording: one JSON record per line, header first.

Line-delimited so a crash-truncated file still verifies up to the last
complete record, and so logs stay greppable in the field.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Optional, Union

from .scene import (Effect, PitchSpec, StateDelta, effect_from_dict, effect_to_dict)

FORMAT_VERSION = 1

RECORD_DELTA = "delta"
RECORD_POSE_RELAY = "pose_relay"


class CorruptLog(Exception):
    def __init__(self, message: str, index: int):
        super().__init__(f"record {index}: {message}")
        self.index = index


class LogWriteFailure(Exception):
    pass


@dataclass(frozen=True, slots=True)
class LogRecord:
    session_time_ms: int
    seq: int
    kind: str  # delta | pose_relay
    effect: Effect

    def delta(self) -> StateDelta:
        return StateDelta(seq=self.seq, session_time_ms=self.session_time_ms,
                          effect=self.effect)


@dataclass(frozen=True)
class SessionLog:
    pitch: PitchSpec
    created_at: str
    format_version: int = FORMAT_VERSION
    records: tuple[LogRecord, ...] = ()


def _header_dict(pitch: PitchSpec, created_at: str) -> dict:
    return {"format_version": FORMAT_VERSION,
            "pitch": {"length_m": pitch.length_m, "width_m": pitch.width_m},
            "created_at": created_at}


def record_to_dict(r: LogRecord) -> dict:
    return {"t": r.session_time_ms, "seq": r.seq, "kind": r.kind,
            "effect": effect_to_dict(r.effect)}


def record_from_dict(d: dict) -> LogRecord:
    return LogRecord(session_time_ms=int(d["t"]), seq=int(d["seq"]),
                     kind=str(d["kind"]), effect=effect_from_dict(d["effect"]))


class SessionLogWriter:
    """Synchronous line writer; any OS error surfaces as LogWriteFailure so
    the session loop can shut the session down cleanly."""

    def __init__(self, target: Union[str, IO[str]], pitch: PitchSpec,
                 created_at: Optional[str] = None):
        self._owns = isinstance(target, str)
        try:
            self._fh: IO[str] = open(target, "w", encoding="utf-8") if self._owns else target
            header = _header_dict(
                pitch, created_at or datetime.now(timezone.utc).isoformat())
            self._fh.write(json.dumps(header, sort_keys=True) + "\n")
            self._fh.flush()
        except OSError as e:
            raise LogWriteFailure(str(e)) from e

    def append(self, record: LogRecord):
        try:
            self._fh.write(json.dumps(record_to_dict(record), sort_keys=True) + "\n")
            self._fh.flush()
        except OSError as e:
            raise LogWriteFailure(str(e)) from e

    def close(self):
        try:
            if self._owns:
                self._fh.close()
        except OSError as e:
            raise LogWriteFailure(str(e)) from e


def read_log(source: Union[str, IO[str], Iterable[str]]) -> SessionLog:
    """Parse a log; raises CorruptLog on unreadable lines (index 0 = header)."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    elif isinstance(source, io.TextIOBase):
        lines = source.read().splitlines()
    else:
        lines = [ln.rstrip("\n") for ln in source]
    if not lines:
        raise CorruptLog("missing header", 0)
    try:
        header = json.loads(lines[0])
        pitch = PitchSpec(float(header["pitch"]["length_m"]),
                          float(header["pitch"]["width_m"]))
        created = str(header.get("created_at", ""))
        version = int(header.get("format_version", 0))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CorruptLog(f"bad header: {e}", 0) from None
    if version != FORMAT_VERSION:
        raise CorruptLog(f"unsupported format_version {version}", 0)
    records = []
    for i, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        try:
            records.append(record_from_dict(json.loads(line)))
        except Exception as e:
            raise CorruptLog(f"unreadable record: {e}", i) from None
    return SessionLog(pitch=pitch, created_at=created, format_version=version,
                      records=tuple(records))

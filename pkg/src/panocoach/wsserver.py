"""WebSocket transport binding for a session (or replay) core.

Each client connection gets an outbound queue drained by a writer task, so
deltas leave in sequence order per client.  The core is only ever touched
from the event loop, which serializes all scene mutations.
"""

from __future__ import annotations

import asyncio
import logging
import time
from typing import Optional

import websockets

from .protocol import FrameError, decode_frame, encode_frame
from .session import ReplayCore, ServerConfig, SessionCore
from .sessionlog import LogWriteFailure, SessionLog, SessionLogWriter

log = logging.getLogger("panocoach.server")


class BindFailure(Exception):
    pass


def _now_ms() -> int:
    return int(time.monotonic() * 1000)


class CoreServer:
    """Hosts any session-shaped core (connect/on_frame/on_disconnect/on_tick)."""

    def __init__(self, core, host: str = "0.0.0.0", port: int = 8080,
                 tick_hz: int = 30):
        self.core = core
        self.host = host
        self.port = port
        self.tick_hz = tick_hz
        self.actual_port: Optional[int] = None
        self._queues: dict[str, asyncio.Queue] = {}
        self._stop = asyncio.Event()

    def stop(self):
        self._stop.set()

    def _route(self, outgoing):
        for cid, env in outgoing:
            q = self._queues.get(cid)
            if q is not None:
                q.put_nowait(encode_frame(env))

    def _fail_session(self, exc: Exception):
        log.error("session failed: %s", exc)
        try:
            self._route(self.core.end_session(_now_ms()))
        finally:
            self.stop()

    async def _writer(self, ws, q: asyncio.Queue):
        while True:
            frame = await q.get()
            await ws.send(frame)

    async def _handler(self, ws):
        cid = self.core.connect(_now_ms())
        q: asyncio.Queue = asyncio.Queue()
        self._queues[cid] = q
        writer = asyncio.create_task(self._writer(ws, q))
        log.info("client %s connected from %s", cid, ws.remote_address)
        try:
            async for raw in ws:
                if isinstance(raw, str):
                    raw = raw.encode("utf-8")
                try:
                    env = decode_frame(raw)
                except FrameError as e:
                    log.warning("client %s sent a bad frame: %s", cid, e)
                    continue
                try:
                    self._route(self.core.on_frame(cid, env, _now_ms()))
                except LogWriteFailure as e:
                    self._fail_session(e)
                    break
        except websockets.ConnectionClosed:
            pass
        finally:
            writer.cancel()
            self._queues.pop(cid, None)
            self.core.on_disconnect(cid, _now_ms())
            log.info("client %s disconnected", cid)

    async def _ticker(self):
        interval = 1.0 / self.tick_hz
        while not self._stop.is_set():
            await asyncio.sleep(interval)
            try:
                self._route(self.core.on_tick(_now_ms()))
            except LogWriteFailure as e:
                self._fail_session(e)

    async def run(self):
        try:
            server = await websockets.serve(self._handler, self.host, self.port)
        except OSError as e:
            raise BindFailure(f"cannot bind {self.host}:{self.port}: {e}") from e
        self.actual_port = server.sockets[0].getsockname()[1]
        log.info("listening on %s:%d (tick %d Hz)", self.host, self.actual_port,
                 self.tick_hz)
        ticker = asyncio.create_task(self._ticker())
        try:
            await self._stop.wait()
        finally:
            ticker.cancel()
            self._route(self.core.end_session(_now_ms()))
            await asyncio.sleep(0.05)  # let Bye frames flush
            server.close()
            await server.wait_closed()


async def run_session(config: ServerConfig, host: str = "0.0.0.0",
                      server_box: Optional[list] = None):
    """Run a live coaching session until cancelled or stopped."""
    writer = None
    if config.record_path:
        writer = SessionLogWriter(config.record_path, config.pitch)
    core = SessionCore(config, writer)
    server = CoreServer(core, host=host, port=config.port, tick_hz=config.tick_hz)
    if server_box is not None:
        server_box.append(server)
    try:
        await server.run()
    finally:
        if writer is not None:
            writer.close()


async def run_replay_session(log_data: SessionLog, rate: float, port: int,
                             host: str = "0.0.0.0", tick_hz: int = 30,
                             server_box: Optional[list] = None):
    """Serve a recorded log read-only, seekable by a Coach-role operator."""
    core = ReplayCore(log_data, rate)
    server = CoreServer(core, host=host, port=port, tick_hz=tick_hz)
    if server_box is not None:
        server_box.append(server)
    await server.run()

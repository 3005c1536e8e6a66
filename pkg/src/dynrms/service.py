"""WebSocket wire protocol for the real-time session.

One full-duplex JSON channel per client at ``/ws``:

  client -> server: {"type": "command", "id": ..., "kind": ..., "payload": {...}}
                    {"type": "subscribe", "decimation": n}
  server -> client: {"type": "ack", "id": ..., "status": "applied"|"rejected",
                     "t_sim": ..., "detail": ...}
                    {"type": "snapshot", ...}   (see realtime.build_snapshot)
                    {"type": "dropped", "count": n}

Acknowledgments are never dropped; snapshot buffers are bounded and drop
the oldest entries for slow clients, who are told how many were lost.
"""

from __future__ import annotations

import asyncio
import logging
import threading
from collections import deque
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .realtime import Command, RealtimeSession

log = logging.getLogger(__name__)

SNAPSHOT_BUFFER = 256


class ClientChannel:
    """Thread-safe outbound buffer bridging the simulation thread to one client."""

    def __init__(self, snapshot_capacity: int = SNAPSHOT_BUFFER):
        self._cond = threading.Condition()
        self._acks: deque = deque()
        self._snapshots: deque = deque()
        self._capacity = snapshot_capacity
        self._dropped = 0

    def put_ack(self, ack) -> None:
        with self._cond:
            self._acks.append(ack.to_message())
            self._cond.notify()

    def put_snapshot(self, snapshot: dict) -> None:
        with self._cond:
            if len(self._snapshots) >= self._capacity:
                self._snapshots.popleft()
                self._dropped += 1
            self._snapshots.append(snapshot)
            self._cond.notify()

    def get_batch(self, timeout: float = 0.25) -> list[dict]:
        """Pending messages: dropped notice first, then acks, then snapshots."""
        with self._cond:
            if not (self._acks or self._snapshots or self._dropped):
                self._cond.wait(timeout)
            out: list[dict] = []
            if self._dropped:
                out.append({"type": "dropped", "count": self._dropped})
                self._dropped = 0
            out.extend(self._acks)
            self._acks.clear()
            out.extend(self._snapshots)
            self._snapshots.clear()
            return out


def create_app(session: RealtimeSession, static_dir: "str | Path | None" = None) -> FastAPI:
    app = FastAPI(title="dynrms real-time service")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        channel = ClientChannel()
        token: int | None = None
        stop = asyncio.Event()

        async def sender():
            while not stop.is_set():
                batch = await asyncio.to_thread(channel.get_batch, 0.25)
                for msg in batch:
                    await ws.send_json(msg)

        async def receiver():
            nonlocal token
            while True:
                data = await ws.receive_json()
                mtype = data.get("type")
                if mtype == "subscribe":
                    decimation = int(data.get("decimation", 1))
                    if token is not None:
                        session.remove_subscriber(token)
                    token = session.add_subscriber(channel.put_snapshot, decimation)
                elif mtype == "command":
                    cmd = Command(str(data.get("id")), str(data.get("kind")),
                                  dict(data.get("payload") or {}))
                    session.submit(cmd, reply=channel.put_ack)
                else:
                    await ws.send_json({"type": "ack", "id": data.get("id"),
                                        "status": "rejected", "t_sim": session.t_sim,
                                        "detail": f"unknown message type {mtype!r}"})

        send_task = asyncio.create_task(sender())
        try:
            await receiver()
        except WebSocketDisconnect:
            pass
        except Exception:
            log.exception("websocket receiver failed")
        finally:
            stop.set()
            if token is not None:
                session.remove_subscriber(token)
            send_task.cancel()
            try:
                await send_task
            except (asyncio.CancelledError, Exception):
                pass

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(session: RealtimeSession, host: str = "127.0.0.1", port: int = 8700,
          static_dir=None) -> None:
    """Run the session thread plus a uvicorn server until interrupted."""
    import uvicorn

    app = create_app(session, static_dir=static_dir)
    thread = threading.Thread(target=session.run, name="dynrms-sim", daemon=True)
    thread.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        session.stop()
        thread.join(timeout=5.0)

"""Live session service: newline-delimited JSON over a local TCP socket,
plus an HTTP bridge so browsers (which cannot open raw sockets) can speak
the same protocol via a chunked NDJSON event stream and message POSTs.

Wire protocol (v1). Every server message carries the session id and a
per-session sequence number that is gapless and monotone:

    {"v": 1, "session": "s0", "seq": 17, "type": "flash", ...}

Client messages: hello {session?}, attend {target|null},
start_phase {phase, ...}, configure {profile}, end_scene {}, ping {}.
Server events: welcome, scene, flash, cue, confidence, activation,
feedback, phase, calibration, run_summary, task_complete, pong, error.

Sessions are isolated: one engine, one synthetic subject, one event
stream each. A disconnected session pauses and can be resumed with a
hello carrying its id until the resume timeout expires.
"""

from __future__ import annotations

import asyncio
import json
import mimetypes
import time
from dataclasses import dataclass, field
from pathlib import Path

from .engine import EngineConfig, SessionEngine
from .errors import EngineError, InputError
from .gate import Activation
from .metrics import itr
from .stimulus import TextureSpec, gen_texture
from .subject import SubjectProfile, SyntheticSubject
from .tasks import (
    ComplexTask,
    ComplexTaskConfig,
    SpellerTask,
    SpellerTaskConfig,
    default_complex_schedule,
)
from .version import ENGINE_VERSION

PROTOCOL_V = 1
_QUEUE_LIMIT = 4096


@dataclass(frozen=True)
class ServeOptions:
    seed: int = 0
    pace: str = "wall"  # "wall" | "fast"
    texture: str = "checkerboard"
    profile_overrides: dict = field(default_factory=dict)
    engine: EngineConfig = field(default_factory=EngineConfig)
    n_cues: int = 6
    resume_timeout_s: float = 300.0
    frontend_dir: str | None = None

    def __post_init__(self):
        if self.pace not in ("wall", "fast"):
            raise EngineError("pace must be 'wall' or 'fast'")


class WireError(Exception):
    pass


class LiveSession:
    def __init__(self, session_id: str, options: ServeOptions, index: int):
        self.session_id = session_id
        self.options = options
        seed = options.seed + index
        self.seed = seed
        self.profile = SubjectProfile(seed=seed, **options.profile_overrides)
        cfg_fields = {f: getattr(options.engine, f) for f in options.engine.__dataclass_fields__}
        cfg_fields["seed"] = seed
        self.engine_config = EngineConfig(**cfg_fields)
        self.subject = SyntheticSubject(self.profile, fs=self.engine_config.fs)
        self.engine = SessionEngine(self.subject, self.engine_config)
        self.texture = TextureSpec(
            kind=options.texture, grid=16, density=0.5, seed=seed
        )
        self.seq = 0
        self.clients: set[asyncio.Queue] = set()
        self.closed = False
        self.paused_since: float | None = time.monotonic()
        self._wake = asyncio.Event()
        self._loop_task: asyncio.Task | None = None
        self._scene_seed = 0
        self._current_task = None
        self._run_counter = 0

    # -- stream ----------------------------------------------------------

    def emit(self, event: dict) -> dict:
        msg = {"v": PROTOCOL_V, "session": self.session_id, "seq": self.seq, **event}
        self.seq += 1
        line = json.dumps(msg, sort_keys=True) + "\n"
        dead = []
        for q in self.clients:
            try:
                q.put_nowait(line)
            except asyncio.QueueFull:
                dead.append(q)
        for q in dead:
            self.detach(q)
        return msg

    def attach(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=_QUEUE_LIMIT)
        self.clients.add(q)
        self.paused_since = None
        self._wake.set()
        return q

    def detach(self, q: asyncio.Queue) -> None:
        self.clients.discard(q)
        if not self.clients:
            self.paused_since = time.monotonic()

    # -- message handling --------------------------------------------------

    def handle(self, msg: dict) -> dict:
        mtype = msg.get("type")
        if mtype == "attend":
            target = msg.get("target")
            if target is not None:
                target = int(target)
                scene = self.engine.scene
                n = scene.schedule.n_targets if scene is not None else self.engine_config.calibration_targets
                if not 0 <= target < n:
                    raise WireError(f"attend target {target} out of range")
            self.engine.attend(target)
            return {"type": "ack", "of": "attend"}
        if mtype == "start_phase":
            return self._start_phase(msg)
        if mtype == "configure":
            return self._configure(msg)
        if mtype == "end_scene":
            self.engine.end_scene()
            self._current_task = None
            self.emit({"type": "phase", "t": self.engine.t_now, "name": "idle"})
            return {"type": "ack", "of": "end_scene"}
        if mtype == "ping":
            self.emit({"type": "pong", "t": self.engine.t_now})
            return {"type": "pong"}
        raise WireError(f"unknown message type {mtype!r}")

    def _texture_payload(self) -> dict:
        grid = gen_texture(self.texture)
        return {**self.texture.to_dict(), "grid": grid.astype(int).tolist()}

    def _configure(self, msg: dict) -> dict:
        if self.engine.tick_index != 0:
            raise WireError("configure is only allowed before the stream starts")
        overrides = dict(msg.get("profile") or {})
        overrides["seed"] = self.seed
        self.profile = SubjectProfile(**overrides)
        self.subject = SyntheticSubject(self.profile, fs=self.engine_config.fs)
        self.engine = SessionEngine(self.subject, self.engine_config)
        return {"type": "ack", "of": "configure"}

    def _start_phase(self, msg: dict) -> dict:
        phase = msg.get("phase")
        if self.engine.scene is not None:
            raise WireError("a scene is already active; send end_scene first")
        deadline = msg.get("deadline_s")
        deadline = float(deadline) if deadline is not None else None
        if msg.get("texture") in ("checkerboard", "grain"):
            self.texture = TextureSpec(kind=msg["texture"], grid=16, density=0.5, seed=self.seed)
        self._scene_seed += 1
        scene_payload: dict
        if phase == "calibration":
            cue = self.engine.start_calibration()
            scene_payload = {
                "scene": "calibration",
                "n_targets": self.engine_config.calibration_targets,
                "cue": cue,
                "cycles": self.engine_config.calibration_cycles,
            }
        elif phase == "speller":
            n_cues = int(msg.get("n_cues", self.options.n_cues))
            task = SpellerTask(
                SpellerTaskConfig(n_cues=n_cues, seed=self.seed + self._scene_seed),
                t_start=self.engine.t_now,
                texture=self.texture,
                deadline_s=deadline,
            )
            self.engine.start_task(task, context="task_b")
            self._current_task = task
            scene_payload = {"scene": "speller", "n_targets": task.n_targets, "n_cues": n_cues}
        elif phase == "complex":
            schedule = default_complex_schedule(seed=self.seed + self._scene_seed)
            task = ComplexTask(
                ComplexTaskConfig(schedule=schedule),
                t_start=self.engine.t_now,
                texture=self.texture,
                deadline_s=deadline,
            )
            self.engine.start_task(task, context="task_a")
            self._current_task = task
            scene_payload = {
                "scene": "complex",
                "n_targets": task.n_targets,
                "schedule": [list(w) for w in schedule],
            }
        else:
            raise WireError(f"unknown phase {phase!r}")
        scene_payload.update(
            {
                "type": "scene",
                "t": self.engine.t_now,
                "texture": self._texture_payload(),
                "deadline_s": deadline,
            }
        )
        self.emit(scene_payload)
        return {"type": "ack", "of": "start_phase", "scene": scene_payload["scene"]}

    # -- tick loop -----------------------------------------------------------

    def ensure_running(self) -> None:
        if self._loop_task is None or self._loop_task.done():
            self._loop_task = asyncio.get_running_loop().create_task(self._loop())

    async def _loop(self) -> None:
        tick_s = self.engine_config.tick_s
        next_deadline = time.monotonic() + tick_s
        while not self.closed:
            if not self.clients:
                self._wake.clear()
                try:
                    await asyncio.wait_for(self._wake.wait(), timeout=1.0)
                except asyncio.TimeoutError:
                    continue
                next_deadline = time.monotonic() + tick_s
                continue
            events = self.engine.tick()
            for ev in events:
                self.emit(ev)
                if ev["type"] == "task_complete":
                    self._emit_run_summary()
            if self.options.pace == "wall":
                now = time.monotonic()
                delay = next_deadline - now
                next_deadline += tick_s
                if delay > 0:
                    await asyncio.sleep(delay)
                elif delay < -1.0:  # fell far behind; drop the backlog
                    next_deadline = now + tick_s
            else:
                if self.engine.scene is None:
                    await asyncio.sleep(0.001)
                else:
                    await asyncio.sleep(0)

    def _emit_run_summary(self) -> None:
        task = self._current_task
        if task is None:
            return
        tally = task.tally
        metrics = itr(tally.n_classes, tally.correct, tally.incorrect, tally.t_start, tally.t_end)
        self._run_counter += 1
        self.emit(
            {
                "type": "run_summary",
                "t": self.engine.t_now,
                "run_id": f"live_{self._run_counter:02d}_{tally.task_type}",
                "task_type": tally.task_type,
                "correct": tally.correct,
                "incorrect": tally.incorrect,
                **metrics.to_dict(),
            }
        )
        self.emit({"type": "phase", "t": self.engine.t_now, "name": "idle"})
        self._current_task = None

    def close(self) -> None:
        self.closed = True
        self._wake.set()
        if self._loop_task is not None:
            self._loop_task.cancel()


class SessionManager:
    def __init__(self, options: ServeOptions):
        self.options = options
        self.sessions: dict[str, LiveSession] = {}
        self._counter = 0

    def hello(self, msg: dict) -> tuple[LiveSession, dict]:
        sid = msg.get("session")
        if sid is not None and sid in self.sessions:
            session = self.sessions[sid]
            resumed = True
        else:
            self._counter += 1
            sid = sid or f"s{self._counter}"
            if sid in self.sessions:
                raise WireError(f"session id {sid!r} already exists")
            session = LiveSession(sid, self.options, index=self._counter)
            self.sessions[sid] = session
            resumed = False
        welcome = {
            "type": "welcome",
            "resumed": resumed,
            "engine_version": ENGINE_VERSION,
            "fs": session.engine_config.fs,
            "tick_s": session.engine_config.tick_s,
            "threshold": session.engine_config.threshold,
            "dwell_s": session.engine_config.dwell_s,
            "texture": session.texture.to_dict(),
        }
        return session, welcome

    def get(self, sid) -> LiveSession:
        session = self.sessions.get(sid)
        if session is None:
            raise WireError(f"unknown session {sid!r}")
        return session

    def route(self, msg: dict) -> tuple[LiveSession, dict]:
        session = self.get(msg.get("session"))
        reply = session.handle(msg)
        return session, reply

    async def sweep_loop(self) -> None:
        while True:
            await asyncio.sleep(5.0)
            now = time.monotonic()
            for sid, session in list(self.sessions.items()):
                if (
                    session.paused_since is not None
                    and now - session.paused_since > self.options.resume_timeout_s
                ):
                    session.close()
                    del self.sessions[sid]


class WireServer:
    """TCP NDJSON endpoint plus the HTTP bridge, one asyncio loop."""

    def __init__(self, options: ServeOptions, host: str = "127.0.0.1", port: int = 8750,
                 http_port: int = 8751):
        self.options = options
        self.host = host
        self.port = port
        self.http_port = http_port
        self.manager = SessionManager(options)
        self._servers: list[asyncio.AbstractServer] = []
        self._sweeper: asyncio.Task | None = None

    # -- TCP NDJSON ---------------------------------------------------------

    async def _tcp_conn(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        session: LiveSession | None = None
        queue: asyncio.Queue | None = None
        pump: asyncio.Task | None = None

        async def pump_queue(q: asyncio.Queue):
            try:
                while True:
                    line = await q.get()
                    writer.write(line.encode())
                    await writer.drain()
            except (ConnectionError, asyncio.CancelledError):
                pass

        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise WireError("message must be a JSON object")
                    if msg.get("type") == "hello":
                        if session is not None:
                            raise WireError("already attached to a session")
                        session, welcome = self.manager.hello(msg)
                        queue = session.attach()
                        pump = asyncio.get_running_loop().create_task(pump_queue(queue))
                        session.ensure_running()
                        session.emit(welcome)
                    else:
                        if session is None:
                            msg_session = msg.get("session")
                            target = self.manager.get(msg_session)
                            reply = target.handle(msg)
                            target.emit(reply)
                        else:
                            reply = session.handle(msg)
                            session.emit(reply)
                except WireError as exc:
                    payload = {"type": "error", "message": str(exc)}
                    if session is not None:
                        session.emit(payload)
                    else:
                        writer.write((json.dumps({"v": PROTOCOL_V, **payload}) + "\n").encode())
                        await writer.drain()
                except (EngineError, InputError, ValueError, KeyError, TypeError) as exc:
                    payload = {"type": "error", "message": f"{type(exc).__name__}: {exc}"}
                    if session is not None:
                        session.emit(payload)
                    else:
                        writer.write((json.dumps({"v": PROTOCOL_V, **payload}) + "\n").encode())
                        await writer.drain()
        finally:
            if pump is not None:
                pump.cancel()
            if session is not None and queue is not None:
                session.detach(queue)
            writer.close()

    # -- HTTP bridge ---------------------------------------------------------

    async def _http_conn(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        try:
            request = await reader.readline()
            if not request:
                writer.close()
                return
            try:
                method, path, _version = request.decode("latin1").split()
            except ValueError:
                await self._http_plain(writer, 400, {"error": "bad request line"})
                return
            headers = {}
            while True:
                line = await reader.readline()
                if line in (b"\r\n", b"\n", b""):
                    break
                name, _, value = line.decode("latin1").partition(":")
                headers[name.strip().lower()] = value.strip()

            if method == "POST" and path == "/api/msg":
                length = int(headers.get("content-length", "0"))
                body = await reader.readexactly(length) if length else b"{}"
                await self._http_msg(writer, body)
            elif method == "GET" and path.startswith("/api/stream/"):
                await self._http_stream(writer, path.rsplit("/", 1)[1])
            elif method == "GET" and path == "/api/health":
                await self._http_plain(writer, 200, {"ok": True, "sessions": len(self.manager.sessions)})
            elif method == "GET":
                await self._http_static(writer, path)
            else:
                await self._http_plain(writer, 405, {"error": f"unsupported method {method}"})
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            try:
                writer.close()
            except Exception:
                pass

    async def _http_plain(self, writer, status: int, payload: dict) -> None:
        body = (json.dumps(payload, sort_keys=True) + "\n").encode()
        reason = {200: "OK", 400: "Bad Request", 404: "Not Found", 405: "Method Not Allowed"}.get(
            status, "Error"
        )
        writer.write(
            f"HTTP/1.1 {status} {reason}\r\n"
            f"Content-Type: application/json\r\n"
            f"Content-Length: {len(body)}\r\n"
            f"Connection: close\r\n\r\n".encode() + body
        )
        await writer.drain()

    async def _http_msg(self, writer, body: bytes) -> None:
        try:
            msg = json.loads(body)
            if not isinstance(msg, dict):
                raise WireError("message must be a JSON object")
            if msg.get("type") == "hello":
                session, welcome = self.manager.hello(msg)
                session.ensure_running()
                await self._http_plain(writer, 200, {"ok": True, "session": session.session_id, **welcome})
            else:
                session, reply = self.manager.route(msg)
                await self._http_plain(writer, 200, {"ok": True, "session": session.session_id, **reply})
        except WireError as exc:
            await self._http_plain(writer, 400, {"ok": False, "error": str(exc)})
        except (EngineError, InputError, ValueError, KeyError, TypeError) as exc:
            await self._http_plain(writer, 400, {"ok": False, "error": f"{type(exc).__name__}: {exc}"})

    async def _http_stream(self, writer, sid: str) -> None:
        try:
            session = self.manager.get(sid)
        except WireError as exc:
            await self._http_plain(writer, 404, {"ok": False, "error": str(exc)})
            return
        queue = session.attach()
        session.ensure_running()
        writer.write(
            b"HTTP/1.1 200 OK\r\n"
            b"Content-Type: application/x-ndjson\r\n"
            b"Transfer-Encoding: chunked\r\n"
            b"Cache-Control: no-cache\r\n"
            b"Connection: close\r\n\r\n"
        )
        try:
            await writer.drain()
            while True:
                line = (await queue.get()).encode()
                writer.write(f"{len(line):x}\r\n".encode() + line + b"\r\n")
                await writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            session.detach(queue)

    async def _http_static(self, writer, path: str) -> None:
        root = self.options.frontend_dir
        if root is None:
            await self._http_plain(writer, 404, {"error": "no frontend directory configured"})
            return
        root = Path(root).resolve()
        rel = path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            await self._http_plain(writer, 404, {"error": f"not found: {path}"})
            return
        body = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        writer.write(
            f"HTTP/1.1 200 OK\r\nContent-Type: {ctype}\r\n"
            f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n".encode() + body
        )
        await writer.drain()

    # -- lifecycle -------------------------------------------------------------

    async def start(self) -> None:
        tcp = await asyncio.start_server(self._tcp_conn, self.host, self.port)
        http = await asyncio.start_server(self._http_conn, self.host, self.http_port)
        self._servers = [tcp, http]
        self._sweeper = asyncio.get_running_loop().create_task(self.manager.sweep_loop())

    async def stop(self) -> None:
        if self._sweeper is not None:
            self._sweeper.cancel()
        for session in list(self.manager.sessions.values()):
            session.close()
        for server in self._servers:
            server.close()
            await server.wait_closed()

    async def serve_forever(self) -> None:
        await self.start()
        try:
            await asyncio.gather(*(s.serve_forever() for s in self._servers))
        finally:
            await self.stop()

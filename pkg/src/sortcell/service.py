"""Live session service: HTTP snapshot/command plus a server-push stream.

The engine advances in a single background thread, throttled so simulated
time tracks wall-clock time times the speed multiplier. Commands arrive over
HTTP, are validated, and join the engine's queue; they take effect at the
next controller scan boundary, exactly like a scripted operator action. The
stream endpoint is Server-Sent Events: a full snapshot is pushed whenever
the state changed, at most at the configured rate, so clients can render
without ever computing cell state locally.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .engine import DeadlockDetected, Engine, US
from .scenario import (
    COMMAND_NAMES,
    OperatorAction,
    Scenario,
    ScenarioInvalid,
    _validate_command,
)


class SimSession:
    """Owns the engine thread; all outside access goes through the lock."""

    def __init__(self, scenario: Scenario, speed: float = 1.0):
        if speed <= 0:
            raise ScenarioInvalid("speed multiplier must be positive")
        self.engine = Engine(scenario)
        self.speed = speed
        self.error: str | None = None
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, name="sim-engine", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread.is_alive():
            self._thread.join(timeout=2.0)

    @property
    def finished(self) -> bool:
        return (
            self.error is not None
            or self.engine.completed
            or self.engine.now_us >= self.engine.duration_us
        )

    def _loop(self) -> None:
        wall_start = time.monotonic()
        sim_start = self.engine.now_us
        try:
            while not self._stop.is_set() and not self.finished:
                elapsed = time.monotonic() - wall_start
                target = sim_start + round(elapsed * self.speed * US)
                with self._lock:
                    self.engine.step_until(min(target, self.engine.duration_us))
                time.sleep(0.005)
        except DeadlockDetected as exc:
            self.error = f"deadlock: {exc}"
        except Exception as exc:  # surfaced to clients via /snapshot
            self.error = f"engine fault: {exc}"

    def snapshot(self) -> dict:
        with self._lock:
            snap = self.engine.snapshot()
        if self.error:
            snap["error"] = self.error
        snap["finished"] = self.finished
        return snap

    def submit(self, command: str, args: dict) -> int:
        _validate_command(command, args, "command")
        action = OperatorAction(
            t_s=self.engine.now_us / US, command=command, args=args, route="hmi"
        )
        with self._lock:
            return self.engine.submit_command(action)


def _command_error(message: str) -> dict:
    return {"error": "invalid_command", "message": message}


class _Handler(BaseHTTPRequestHandler):
    # class attributes injected by make_server
    session: SimSession
    stream_interval_s: float
    static_root: Path | None

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # silence per-request chatter
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path == "/snapshot":
            self._send_json(200, self.session.snapshot())
        elif self.path == "/health":
            self._send_json(200, {"ok": True, "finished": self.session.finished})
        elif self.path == "/stream":
            self._stream()
        else:
            if self.static_root is not None and self._serve_static():
                return
            self._send_json(404, {"error": "not_found", "path": self.path})

    def do_POST(self) -> None:
        if self.path != "/command":
            self._send_json(404, {"error": "not_found", "path": self.path})
            return
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length) if length else b""
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._send_json(400, _command_error("body must be a JSON object"))
            return
        if not isinstance(doc, dict):
            self._send_json(400, _command_error("body must be a JSON object"))
            return
        unknown = set(doc) - {"command", "args"}
        if unknown:
            self._send_json(400, _command_error(f"unknown keys {sorted(unknown)}"))
            return
        command = doc.get("command")
        args = doc.get("args", {})
        if not isinstance(command, str) or command not in COMMAND_NAMES:
            self._send_json(400, _command_error(f"unknown command {command!r}"))
            return
        if not isinstance(args, dict):
            self._send_json(400, _command_error("args must be an object"))
            return
        try:
            command_id = self.session.submit(command, args)
        except ScenarioInvalid as exc:
            self._send_json(400, _command_error(str(exc)))
            return
        self._send_json(200, {"queued": True, "command_id": command_id})

    def _stream(self) -> None:
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        last_sent = None
        try:
            self.wfile.write(b"retry: 1000\n\n")
            while True:
                snap = self.session.snapshot()
                body = json.dumps(snap, sort_keys=True)
                if body != last_sent:
                    self.wfile.write(b"event: snapshot\ndata: " + body.encode("utf-8") + b"\n\n")
                    self.wfile.flush()
                    last_sent = body
                if self.session.finished:
                    self.wfile.write(b"event: end\ndata: {}\n\n")
                    self.wfile.flush()
                    return
                time.sleep(self.stream_interval_s)
        except (BrokenPipeError, ConnectionResetError):
            return

    _CONTENT_TYPES = {
        ".html": "text/html",
        ".js": "text/javascript",
        ".css": "text/css",
        ".map": "application/json",
        ".svg": "image/svg+xml",
    }

    def _serve_static(self) -> bool:
        rel = self.path.lstrip("/") or "index.html"
        target = (self.static_root / rel).resolve()
        try:
            target.relative_to(self.static_root.resolve())
        except ValueError:
            return False
        if not target.is_file():
            return False
        body = target.read_bytes()
        self.send_response(200)
        self.send_header(
            "Content-Type", self._CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        )
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True


def make_server(
    session: SimSession,
    host: str = "127.0.0.1",
    port: int = 8787,
    stream_hz: float = 10.0,
    static_root: Path | None = None,
) -> ThreadingHTTPServer:
    handler = type(
        "SessionHandler",
        (_Handler,),
        {
            "session": session,
            "stream_interval_s": 1.0 / max(stream_hz, 0.1),
            "static_root": static_root,
        },
    )
    return ThreadingHTTPServer((host, port), handler)


def default_static_root() -> Path | None:
    """The built operator frontend, when present next to the package."""
    for candidate in (
        Path(__file__).resolve().parent.parent.parent / "frontend" / "dist",
        Path.cwd() / "frontend" / "dist",
    ):
        if (candidate / "index.html").is_file():
            return candidate
    return None


def serve(
    scenario: Scenario,
    host: str = "127.0.0.1",
    port: int = 8787,
    speed: float = 1.0,
    stream_hz: float = 10.0,
) -> None:
    session = SimSession(scenario, speed=speed)
    server = make_server(
        session, host=host, port=port, stream_hz=stream_hz, static_root=default_static_root()
    )
    session.start()
    print(f"serving on http://{host}:{port} (speed x{speed}, stream {stream_hz} Hz)")
    try:
        server.serve_forever()
    finally:
        session.stop()
        server.server_close()

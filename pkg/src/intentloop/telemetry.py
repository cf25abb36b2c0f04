"""Telemetry wire protocol and the live session service.

Outbound messages are newline-delimited JSON objects, one per line,
each with a schema version `v`, a `kind` (frame | stage | cue | device
| log) and `t_ms`. Inbound control messages use kinds start_stage,
stop, motor, and load_model. Unknown kinds are ignored with a log
entry; malformed control lines are rejected per-message without
dropping the connection.

The server speaks the plain line protocol over TCP and additionally
accepts RFC6455 WebSocket upgrades on the same port (one JSON message
per text frame) so the browser dashboard can connect directly.

Publishing never blocks the 50Hz engine loop: each subscriber owns a
bounded deque and a slow consumer silently loses its oldest messages.
"""

from __future__ import annotations

import base64
import hashlib
import json
import queue
import socket
import struct
import threading
from collections import deque
from typing import Callable, Optional

from .errors import StopRequested

PROTOCOL_VERSION = 1
DEFAULT_SUBSCRIBER_BUFFER = 512

OUTBOUND_KINDS = ("frame", "stage", "cue", "device", "log", "report")
CONTROL_KINDS = ("start_stage", "stop", "motor", "load_model")


def encode_message(kind: str, t_ms: int, **payload) -> str:
    msg = {"v": PROTOCOL_VERSION, "kind": kind, "t_ms": int(t_ms)}
    msg.update(payload)
    return json.dumps(msg, separators=(",", ":"))


def decode_message(line: str) -> dict:
    msg = json.loads(line)
    if not isinstance(msg, dict) or "kind" not in msg:
        raise ValueError("message must be an object with a 'kind'")
    return msg


class Subscriber:
    """Bounded buffer between the publisher and one connection."""

    def __init__(self, maxlen: int = DEFAULT_SUBSCRIBER_BUFFER):
        self._lines: deque[str] = deque(maxlen=maxlen)
        self._cond = threading.Condition()
        self.closed = False

    def put(self, line: str) -> None:
        with self._cond:
            self._lines.append(line)  # deque drops the oldest when full
            self._cond.notify()

    def drain(self, timeout: float = 0.5) -> list[str]:
        with self._cond:
            if not self._lines:
                self._cond.wait(timeout)
            out = list(self._lines)
            self._lines.clear()
            return out

    def close(self) -> None:
        with self._cond:
            self.closed = True
            self._cond.notify()


class TelemetryHub:
    """Fan-out point for telemetry; also caches the latest stage and
    device messages so new subscribers get a state snapshot first."""

    def __init__(self):
        self._lock = threading.Lock()
        self._subscribers: list[Subscriber] = []
        self._last_stage: Optional[str] = None
        self._last_device: Optional[str] = None
        self.published = 0

    def publish(self, kind: str, t_ms: int, **payload) -> None:
        line = encode_message(kind, t_ms, **payload)
        with self._lock:
            if kind == "stage":
                self._last_stage = line
            elif kind == "device":
                self._last_device = line
            self.published += 1
            subs = list(self._subscribers)
        for sub in subs:
            sub.put(line)

    def subscribe(self, maxlen: int = DEFAULT_SUBSCRIBER_BUFFER) -> Subscriber:
        sub = Subscriber(maxlen)
        with self._lock:
            # snapshot first so the subscriber knows the current stage
            if self._last_stage is not None:
                sub.put(self._last_stage)
            if self._last_device is not None:
                sub.put(self._last_device)
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)
        sub.close()


# -- WebSocket plumbing (enough of RFC6455 for a local dashboard) -----------

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


def _ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def _ws_handshake(conn: socket.socket, initial: bytes) -> bool:
    data = initial
    while b"\r\n\r\n" not in data:
        chunk = conn.recv(4096)
        if not chunk:
            return False
        data += chunk
    headers = {}
    for raw in data.split(b"\r\n")[1:]:
        if b":" in raw:
            name, _, value = raw.partition(b":")
            headers[name.strip().lower()] = value.strip()
    key = headers.get(b"sec-websocket-key")
    if key is None:
        return False
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {_ws_accept_key(key.decode())}\r\n"
        "\r\n"
    )
    conn.sendall(response.encode())
    return True


def _ws_encode_text(payload: bytes) -> bytes:
    n = len(payload)
    if n < 126:
        head = struct.pack("!BB", 0x81, n)
    elif n < 1 << 16:
        head = struct.pack("!BBH", 0x81, 126, n)
    else:
        head = struct.pack("!BBQ", 0x81, 127, n)
    return head + payload


def _recv_exact(conn: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def _ws_read_message(conn: socket.socket) -> Optional[bytes]:
    """Read one client message; answers pings, returns None on close."""
    while True:
        head = _recv_exact(conn, 2)
        if head is None:
            return None
        opcode = head[0] & 0x0F
        masked = bool(head[1] & 0x80)
        length = head[1] & 0x7F
        if length == 126:
            ext = _recv_exact(conn, 2)
            if ext is None:
                return None
            length = struct.unpack("!H", ext)[0]
        elif length == 127:
            ext = _recv_exact(conn, 8)
            if ext is None:
                return None
            length = struct.unpack("!Q", ext)[0]
        mask = _recv_exact(conn, 4) if masked else b"\x00" * 4
        if mask is None:
            return None
        payload = _recv_exact(conn, length) if length else b""
        if payload is None:
            return None
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        if opcode == 0x8:  # close
            return None
        if opcode == 0x9:  # ping -> pong
            conn.sendall(struct.pack("!BB", 0x8A, len(payload)) + payload)
            continue
        if opcode in (0x1, 0x2):
            return payload


class TelemetryServer:
    """Accepts subscriber/control connections and bridges them to a hub."""

    def __init__(
        self,
        hub: TelemetryHub,
        on_control: Callable[[dict], None],
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.hub = hub
        self.on_control = on_control
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self.address = self._sock.getsockname()
        self._stop = threading.Event()
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)

    def start(self) -> None:
        self._accept_thread.start()

    def close(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_connection, args=(conn,), daemon=True).start()

    def _serve_connection(self, conn: socket.socket) -> None:
        conn.settimeout(0.2)
        try:
            head = conn.recv(4, socket.MSG_PEEK)
        except socket.timeout:
            head = b""
        except OSError:
            conn.close()
            return
        conn.settimeout(None)
        if head.startswith(b"GET"):
            initial = conn.recv(4096)
            if not _ws_handshake(conn, initial):
                conn.close()
                return
            self._run_ws(conn)
        else:
            self._run_plain(conn)

    def _handle_control_line(self, raw: str) -> None:
        try:
            msg = decode_message(raw)
        except (ValueError, json.JSONDecodeError) as e:
            self.hub.publish("log", 0, level="warn", message=f"bad control message: {e}")
            return
        if msg["kind"] not in CONTROL_KINDS:
            self.hub.publish("log", 0, level="warn", message=f"unknown control kind {msg['kind']!r}")
            return
        self.on_control(msg)

    def _run_plain(self, conn: socket.socket) -> None:
        sub = self.hub.subscribe()
        stop = threading.Event()

        def reader() -> None:
            try:
                with conn.makefile("r", encoding="utf-8", errors="replace") as fh:
                    for line in fh:
                        line = line.strip()
                        if line:
                            self._handle_control_line(line)
            except OSError:
                pass
            finally:
                stop.set()
                sub.close()

        threading.Thread(target=reader, daemon=True).start()
        try:
            while not stop.is_set() and not self._stop.is_set():
                lines = sub.drain(timeout=0.5)
                if lines:
                    conn.sendall(("\n".join(lines) + "\n").encode())
        except OSError:
            pass
        finally:
            self.hub.unsubscribe(sub)
            try:
                conn.close()
            except OSError:
                pass

    def _run_ws(self, conn: socket.socket) -> None:
        sub = self.hub.subscribe()
        stop = threading.Event()
        send_lock = threading.Lock()

        def reader() -> None:
            try:
                while True:
                    payload = _ws_read_message(conn)
                    if payload is None:
                        break
                    text = payload.decode("utf-8", errors="replace").strip()
                    if text:
                        self._handle_control_line(text)
            except OSError:
                pass
            finally:
                stop.set()
                sub.close()

        threading.Thread(target=reader, daemon=True).start()
        try:
            while not stop.is_set() and not self._stop.is_set():
                lines = sub.drain(timeout=0.5)
                if lines:
                    data = b"".join(_ws_encode_text(line.encode()) for line in lines)
                    with send_lock:
                        conn.sendall(data)
        except OSError:
            pass
        finally:
            self.hub.unsubscribe(sub)
            try:
                conn.close()
            except OSError:
                pass


class SessionService:
    """Binds a session to a telemetry server and runs stages on demand.

    Control messages arrive on a queue and are applied between stage
    runs; during a paced stage the session's control hook drains the
    same queue every tick, so motor toggles and stops take effect
    mid-stream.
    """

    def __init__(self, session, host: str = "127.0.0.1", port: int = 0):
        from .session import Stage  # late import to avoid a cycle

        self._stage_enum = Stage
        self.session = session
        self.hub = session.hub if session.hub is not None else TelemetryHub()
        session.hub = self.hub
        session.paced = True
        session.control_hook = self._apply_pending_controls
        self.controls: "queue.Queue[dict]" = queue.Queue()
        self.server = TelemetryServer(self.hub, self.controls.put, host, port)
        self._shutdown = threading.Event()

    @property
    def address(self):
        return self.server.address

    def shutdown(self) -> None:
        self._shutdown.set()
        self.server.close()

    def _apply_pending_controls(self) -> None:
        while True:
            try:
                msg = self.controls.get_nowait()
            except queue.Empty:
                return
            kind = msg["kind"]
            if kind == "motor":
                self.session.engine.set_motor(bool(msg.get("on", msg.get("engaged", True))))
            elif kind == "stop":
                raise StopRequested()
            elif kind == "start_stage":
                self.hub.publish("log", 0, level="warn",
                                 message="a stage is already running; stop it first")
            elif kind == "load_model":
                self._load_model(msg)

    def _load_model(self, msg: dict) -> None:
        from . import lda

        try:
            self.session.engine.load_model(lda.load_model(msg["path"]))
            self.hub.publish("log", 0, level="info", message=f"model loaded from {msg['path']}")
        except (OSError, ValueError, KeyError) as e:
            self.hub.publish("log", 0, level="warn", message=f"load_model failed: {e}")

    def _run_stage(self, name: str) -> None:
        from .errors import IntentLoopError

        session = self.session
        try:
            if name == "collect":
                session.run_collection()
            elif name == "train":
                session.train_iteration()
            elif name == "evaluate":
                report = session.evaluate_iteration()
                self.hub.publish(
                    "report", 0,
                    iteration=report.iteration,
                    test_accuracy=report.test_accuracy,
                    raw_accuracy=report.raw_accuracy,
                    weight_variance_open=report.weight_variance_open,
                    silhouette=report.silhouette,
                )
                self.hub.publish("log", 0, level="info",
                                 message=f"iteration {report.iteration} accuracy {report.test_accuracy:.3f}")
            elif name == "practice":
                session.run_practice()
            else:
                self.hub.publish("log", 0, level="warn", message=f"unknown stage {name!r}")
                return
        except StopRequested:
            self.hub.publish("log", 0, level="info", message=f"stage {name} stopped by operator")
        except IntentLoopError as e:
            self.hub.publish("log", 0, level="warn", message=f"stage {name} failed: {e}")
        self.hub.publish("stage", 0, stage=self._stage_enum.IDLE.value,
                         iteration=self.session.iteration)

    def run_forever(self) -> None:
        self.server.start()
        self.hub.publish("stage", 0, stage=self._stage_enum.IDLE.value,
                         iteration=self.session.iteration)
        while not self._shutdown.is_set():
            try:
                msg = self.controls.get(timeout=0.25)
            except queue.Empty:
                continue
            kind = msg["kind"]
            if kind == "start_stage":
                self._run_stage(str(msg.get("stage", "")))
            elif kind == "motor":
                self.session.engine.set_motor(bool(msg.get("on", msg.get("engaged", True))))
            elif kind == "load_model":
                self._load_model(msg)
            # idle 'stop' is a no-op

"""Decision backends: the scripted policy and a line-delimited JSON client
for an external decision service, plus a mock service that echoes the
scripted policy."""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from dataclasses import dataclass

log = logging.getLogger(__name__)

ACTIONS = ("ExploreStep", "BuildMap", "PlanGlobal", "PlanLocal", "ExecuteStep", "ReplanLocal",
           "ReplanGlobal", "ReportError", "Stop")

BACKGROUND = ("Mobile robot in a multi-room indoor scene. Choose the next action from O given the "
              "instruction I, map M, planning history P, recent trajectory T and status S.")

REQUEST_KEYS = ("B", "I", "M", "P", "T", "S", "O")
TRAJECTORY_TAIL = 50


class ProtocolError(ValueError):
    pass


def scripted_policy(S: dict) -> str:
    """Deterministic action table; reads only the status record."""
    if not S["explored"]:
        return "ExploreStep"
    if not S["mapped"]:
        return "BuildMap"
    if not S["plan_valid"]:
        return "PlanGlobal"
    if S["at_goal"]:
        return "Stop"
    if S["replans_global"] > S["max_global_replans"]:
        return "ReportError"
    if S["local_blocked"] or S["segment_timeout"] or S["visit_trigger"]:
        if S["replans_global"] >= S["max_global_replans"]:
            return "ReportError"
        return "ReplanGlobal"
    if S["conflict_cells"] > 0 or S["plan_failed"]:
        return "ReplanLocal"
    if not S["local_ready"]:
        return "PlanLocal"
    return "ExecuteStep"


def encode_context(B: str, I: dict, M: dict, P: list, T: list, S: dict, O=ACTIONS) -> str:
    """Single-line JSON request; T is cut to its last 50 entries."""
    req = {"B": B, "I": I, "M": M, "P": P, "T": list(T)[-TRAJECTORY_TAIL:], "S": S, "O": list(O)}
    return json.dumps(req, separators=(",", ":"), allow_nan=False)


def decode_action(line: str | bytes, allowed=ACTIONS) -> str:
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed response: {exc}") from exc
    if not isinstance(msg, dict) or "A" not in msg:
        raise ProtocolError("response lacks key 'A'")
    act = msg["A"]
    if act not in allowed:
        raise ProtocolError(f"unknown action {act!r}")
    return act


class ScriptedBackend:
    name = "scripted"
    needs_context = False

    def decide(self, S: dict, request: str | None = None) -> tuple[str, str | None]:
        return scripted_policy(S), None

    def close(self) -> None:
        pass


@dataclass
class ServiceBackend:
    """Client for an external service. Any failure for a step falls back to
    the scripted policy and reports why."""

    host: str
    port: int
    timeout_s: float = 10.0
    name: str = "service"
    needs_context: bool = True

    def __post_init__(self):
        self._sock = None
        self._buf = b""

    @classmethod
    def from_address(cls, addr: str, timeout_s: float = 10.0) -> "ServiceBackend":
        host, sep, port = addr.rpartition(":")
        if not sep or not host or not port.isdigit():
            raise ValueError(f"backend address must be host:port, got {addr!r}")
        return cls(host, int(port), timeout_s)

    def _connect(self):
        if self._sock is None:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout_s)
            self._buf = b""
        return self._sock

    def _readline(self, sock) -> bytes:
        while b"\n" not in self._buf:
            chunk = sock.recv(65536)
            if not chunk:
                raise ConnectionError("service closed the connection")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return line

    def decide(self, S: dict, request: str | None = None) -> tuple[str, str | None]:
        try:
            sock = self._connect()
            sock.settimeout(self.timeout_s)
            sock.sendall(request.encode() + b"\n")
            return decode_action(self._readline(sock)), None
        except ProtocolError as exc:
            reason = str(exc)
        except (OSError, ConnectionError) as exc:
            reason = f"{type(exc).__name__}: {exc}"
            self.close()
        log.info("backend fallback: %s", reason)
        return scripted_policy(S), reason

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        self._sock = None


def make_backend(choice: str | None, timeout_s: float = 10.0):
    if choice in (None, "", "scripted"):
        return ScriptedBackend()
    return ServiceBackend.from_address(choice, timeout_s)


class _EchoHandler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            try:
                req = json.loads(raw)
                reply = {"A": self.server.respond(req)}
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                reply = {"error": str(exc)}
            self.wfile.write(json.dumps(reply).encode() + b"\n")
            self.wfile.flush()


class MockService(socketserver.ThreadingTCPServer):
    """Echoes the scripted policy for each request. ``respond`` can be
    swapped to inject misbehaviour in tests."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0, respond=None):
        super().__init__((host, port), _EchoHandler)
        self.respond = respond or (lambda req: scripted_policy(req["S"]))

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> "MockService":
        threading.Thread(target=self.serve_forever, daemon=True).start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()

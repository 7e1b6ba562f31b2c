"""Newline-delimited JSON frames exchanged by Alice, Bob and the Physics process.

Each frame is one UTF-8 line::

    {"payload": {...}, "round_id": 17, "type": "CHALLENGE", "v": 1}
"""
from __future__ import annotations

import base64
import enum
import json
import socket
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .qubit_states import LABELS, StateLabel

PROTOCOL_VERSION = 1
MAX_LINE = 1 << 24


class ProtocolError(Exception):
    """Malformed, unexpected or out-of-order frame."""

    def __init__(self, message: str, tag: Optional[str] = None):
        super().__init__(message)
        self.tag = tag


class ConnectionClosed(ProtocolError):
    pass


class FrameType(str, enum.Enum):
    HELLO = "HELLO"
    PULSE_BLOCK = "PULSE_BLOCK"
    DETECTION = "DETECTION"
    CHALLENGE = "CHALLENGE"
    REVEAL = "REVEAL"
    VERDICT = "VERDICT"
    ABORT = "ABORT"
    STATS = "STATS"


@dataclass(frozen=True)
class WireFrame:
    type: FrameType
    round_id: int = 0
    payload: dict = field(default_factory=dict)
    v: int = PROTOCOL_VERSION


def encode_frame(frame: WireFrame) -> bytes:
    body = {
        "v": frame.v,
        "type": FrameType(frame.type).value,
        "round_id": int(frame.round_id),
        "payload": frame.payload,
    }
    return (json.dumps(body, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def decode_frame(line: bytes) -> WireFrame:
    if not line.endswith(b"\n"):
        raise ProtocolError("truncated frame (no line terminator)")
    try:
        body = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed frame: {exc}") from None
    if not isinstance(body, dict) or set(body) != {"v", "type", "round_id", "payload"}:
        raise ProtocolError("frame must have exactly the keys v, type, round_id, payload")
    if body["v"] != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {body['v']!r}")
    tag = body["type"]
    try:
        ftype = FrameType(tag)
    except ValueError:
        raise ProtocolError(f"unknown frame type {tag!r}", tag=tag) from None
    rid = body["round_id"]
    if not isinstance(rid, int) or isinstance(rid, bool) or rid < 0:
        raise ProtocolError(f"bad round_id {rid!r}")
    if not isinstance(body["payload"], dict):
        raise ProtocolError("payload must be an object")
    return WireFrame(ftype, rid, body["payload"], body["v"])


# -- pulse labels -------------------------------------------------------------

def pack_labels(bits: np.ndarray) -> str:
    """2K preparation bits (alpha, c per pulse, MSB-first) as base64."""
    return base64.b64encode(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()).decode("ascii")


class PulseBlock:
    """Lazy view of the labels in a PULSE_BLOCK payload."""

    def __init__(self, payload: dict):
        try:
            self.K = int(payload["K"])
            self._data = base64.b64decode(payload["labels"], validate=True)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad PULSE_BLOCK payload: {exc}") from None
        if self.K < 1 or len(self._data) != (2 * self.K + 7) // 8:
            raise ProtocolError("PULSE_BLOCK length does not match K")

    def _bit(self, p: int) -> int:
        return (self._data[p >> 3] >> (7 - (p & 7))) & 1

    def label_at(self, j: int) -> StateLabel:
        if not 1 <= j <= self.K:
            raise ProtocolError(f"slot {j} outside [1, {self.K}]")
        p = 2 * (j - 1)
        return LABELS[2 * self._bit(p) + self._bit(p + 1)]


# -- transport ------------------------------------------------------------------

class Connection:
    """Blocking frame I/O over a connected stream socket."""

    def __init__(self, sock: socket.socket, name: str = "", timeout: Optional[float] = 120.0):
        self.sock = sock
        self.name = name
        sock.settimeout(timeout)
        self._rfile = sock.makefile("rb")
        self._wfile = sock.makefile("wb")
        self.sent: Optional[list] = None
        self.received: Optional[list] = None

    def record(self):
        """Keep a log of every frame sent and received (used by tests)."""
        self.sent, self.received = [], []
        return self

    def send(self, frame: WireFrame):
        if self.sent is not None:
            self.sent.append(frame)
        try:
            self._wfile.write(encode_frame(frame))
            self._wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError) as exc:
            raise ConnectionClosed(f"{self.name}: send failed ({exc})") from None

    def recv(self) -> WireFrame:
        try:
            line = self._rfile.readline(MAX_LINE)
        except (ConnectionResetError, OSError) as exc:
            raise ConnectionClosed(f"{self.name}: receive failed ({exc})") from None
        if not line:
            raise ConnectionClosed(f"{self.name}: peer closed the connection")
        frame = decode_frame(line)
        if self.received is not None:
            self.received.append(frame)
        return frame

    def close(self):
        for f in (self._wfile, self._rfile):
            try:
                f.close()
            except OSError:
                pass
        try:
            self.sock.close()
        except OSError:
            pass


def parse_endpoint(endpoint: str):
    """``host:port`` -> (AF_INET, (host, port)); anything else is a unix socket path."""
    host, sep, port = endpoint.rpartition(":")
    if sep and port.isdigit() and "/" not in endpoint:
        return socket.AF_INET, (host or "127.0.0.1", int(port))
    return socket.AF_UNIX, endpoint


def connect(endpoint: str, name: str = "", retries: int = 50, delay: float = 0.1) -> Connection:
    import time

    family, addr = parse_endpoint(endpoint)
    last = None
    for _ in range(retries):
        sock = socket.socket(family, socket.SOCK_STREAM)
        try:
            sock.connect(addr)
            return Connection(sock, name)
        except (ConnectionRefusedError, FileNotFoundError) as exc:
            sock.close()
            last = exc
            time.sleep(delay)
    raise ConnectionRefusedError(f"could not connect to {endpoint}: {last}")


def listen(endpoint: str, backlog: int = 2) -> socket.socket:
    family, addr = parse_endpoint(endpoint)
    srv = socket.socket(family, socket.SOCK_STREAM)
    if family == socket.AF_INET:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind(addr)
    srv.listen(backlog)
    return srv

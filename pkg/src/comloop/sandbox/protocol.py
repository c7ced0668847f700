"""Host-side codec for the guest wire protocol (see PROTOCOL.md).

Frames are a 4-byte big-endian unsigned payload length followed by that many
bytes of UTF-8 JSON: an object with `type`, `seq` and `payload` fields.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import BinaryIO

from ..errors import SandboxError

HANDSHAKE = "handshake"
EXEC = "exec"
OUT = "out"
ERR = "err"
STATUS = "status"
INTERRUPT = "interrupt"

FRAME_TYPES = (HANDSHAKE, EXEC, OUT, ERR, STATUS, INTERRUPT)

MAX_FRAME_BYTES = 64 * 1024 * 1024  # guards against a corrupt length prefix


@dataclass(frozen=True, slots=True)
class Frame:
    type: str
    seq: int
    payload: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.type not in FRAME_TYPES:
            raise SandboxError(f"unknown frame type {self.type!r}")
        if self.seq < 0:
            raise SandboxError("frame seq must be non-negative")


def encode_frame(frame: Frame) -> bytes:
    body = json.dumps(
        {"type": frame.type, "seq": frame.seq, "payload": frame.payload},
        separators=(",", ":"),
        sort_keys=True,
    ).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def write_frame(stream: BinaryIO, frame: Frame) -> None:
    stream.write(encode_frame(frame))
    stream.flush()


def read_frame(stream: BinaryIO) -> Frame | None:
    """Read one frame; None on clean EOF; SandboxError on a corrupt stream."""
    prefix = _read_exact(stream, 4, allow_eof=True)
    if prefix is None:
        return None
    (length,) = struct.unpack(">I", prefix)
    if length > MAX_FRAME_BYTES:
        raise SandboxError(f"frame length {length} exceeds the {MAX_FRAME_BYTES} byte cap")
    body = _read_exact(stream, length, allow_eof=False)
    try:
        raw = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SandboxError(f"frame body is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "type" not in raw or "seq" not in raw:
        raise SandboxError("frame object needs type and seq fields")
    return Frame(type=raw["type"], seq=int(raw["seq"]), payload=raw.get("payload") or {})


def _read_exact(stream: BinaryIO, n: int, allow_eof: bool) -> bytes | None:
    chunks = b""
    while len(chunks) < n:
        piece = stream.read(n - len(chunks))
        if not piece:
            if allow_eof and not chunks:
                return None
            raise SandboxError("stream ended mid-frame")
        chunks += piece
    return chunks

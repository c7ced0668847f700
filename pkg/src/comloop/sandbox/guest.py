#!/usr/bin/env python3
"""Guest cell runner: one persistent namespace, length-prefixed JSON frames on stdio.

Run as a standalone program (never imported by the host), so it stays
stdlib-only. The frame layout is specified in PROTOCOL.md; keep this file,
the host codec and the Node runner in agreement.
"""

from __future__ import annotations

import io
import json
import os
import queue
import signal
import struct
import sys
import threading
import time
import traceback

PROTOCOL_VERSION = 1
FLUSH_BYTES = 8192


class FrameWriter:
    """Single binary sink for all outgoing frames; writes are locked."""

    def __init__(self, raw: io.BufferedWriter) -> None:
        self._raw = raw
        self._lock = threading.Lock()

    def send(self, frame_type: str, seq: int, payload: dict) -> None:
        body = json.dumps(
            {"type": frame_type, "seq": seq, "payload": payload},
            separators=(",", ":"),
            sort_keys=True,
        ).encode("utf-8")
        with self._lock:
            self._raw.write(struct.pack(">I", len(body)) + body)
            self._raw.flush()


class StreamProxy(io.TextIOBase):
    """Replaces sys.stdout/sys.stderr inside cells; ships chunks as frames."""

    def __init__(self, writer: FrameWriter, frame_type: str, runner: "Runner") -> None:
        self._writer = writer
        self._frame_type = frame_type
        self._runner = runner
        self._buffer = ""

    def writable(self) -> bool:
        return True

    def write(self, text: str) -> int:
        self._buffer += text
        if "\n" in text or len(self._buffer) >= FLUSH_BYTES:
            self.flush()
        return len(text)

    def flush(self) -> None:
        if not self._buffer:
            return
        chunk, self._buffer = self._buffer, ""
        self._runner.cell_output_bytes += len(chunk.encode("utf-8"))
        self._writer.send(self._frame_type, self._runner.cell_seq, {"text": chunk})


class Runner:
    def __init__(self) -> None:
        self.writer = FrameWriter(sys.stdout.buffer)
        self.inbox: "queue.Queue[object]" = queue.Queue()
        self.namespace: dict = {"__name__": "__main__", "__builtins__": __builtins__}
        self.in_cell = False
        self.interrupted = False
        self.cell_seq = 0
        self.cell_output_bytes = 0

    # --- interrupt plumbing ---

    def sigint_handler(self, _signum, _frame) -> None:
        if self.in_cell and not self.interrupted:
            self.interrupted = True
            raise KeyboardInterrupt
        # stray signal outside a cell: swallow it, the loop must survive

    def request_interrupt(self) -> None:
        # Target the main thread directly so a blocking call (sleep, read)
        # gets EINTR'd instead of finishing before the handler can run.
        if self.in_cell:
            signal.pthread_kill(threading.main_thread().ident, signal.SIGINT)

    # --- frame intake ---

    def reader_loop(self) -> None:
        # Keep process-directed SIGINT away from this thread; only the main
        # thread may take it, or a busy cell would never feel the interrupt.
        signal.pthread_sigmask(signal.SIG_BLOCK, {signal.SIGINT})
        stream = sys.stdin.buffer
        while True:
            prefix = _read_exact(stream, 4)
            if prefix is None:
                self.inbox.put(None)
                return
            (length,) = struct.unpack(">I", prefix)
            body = _read_exact(stream, length)
            if body is None:
                self.inbox.put(None)
                return
            try:
                raw = json.loads(body.decode("utf-8"))
                if not isinstance(raw, dict):
                    raise ValueError("frame is not an object")
                frame_type = raw["type"]
                seq = int(raw["seq"])
            except Exception as exc:  # malformed frame: report, keep running
                self.inbox.put(("bad", 0, f"protocol-error: {exc}"))
                continue
            if frame_type == "interrupt":
                # handled on this thread so a busy cell can be broken
                self.request_interrupt()
                continue
            self.inbox.put((frame_type, seq, raw.get("payload") or {}))

    # --- cell execution ---

    def run_cell(self, seq: int, source: str) -> None:
        self.cell_seq = seq
        self.cell_output_bytes = 0
        self.interrupted = False
        outcome, error = "ok", None
        started = time.monotonic()
        self.in_cell = True
        try:
            code = compile(source, f"<cell-{seq}>", "exec")
            exec(code, self.namespace)
            self.in_cell = False
        except KeyboardInterrupt:
            self.in_cell = False
            outcome, error = "exception", "interrupted"
        except BaseException as exc:
            self.in_cell = False
            # drop the runner's own frame so the trace starts inside the cell
            tb = exc.__traceback__.tb_next if exc.__traceback__ else None
            outcome = "exception"
            error = "".join(traceback.format_exception(type(exc), exc, tb))
        finally:
            self.in_cell = False
        wall_ms = int((time.monotonic() - started) * 1000)
        try:
            sys.stdout.flush()
            sys.stderr.flush()
        except Exception:
            pass
        self.writer.send(
            "status",
            seq,
            {
                "outcome": outcome,
                "error": error,
                "total_output_bytes": self.cell_output_bytes,
                "wall_ms": wall_ms,
            },
        )

    def serve(self) -> None:
        signal.signal(signal.SIGINT, self.sigint_handler)
        threading.Thread(target=self.reader_loop, daemon=True).start()
        self.writer.send(
            "handshake", 0, {"protocol": PROTOCOL_VERSION, "runtime": "python", "pid": os.getpid()}
        )
        sys.stdout = StreamProxy(self.writer, "out", self)
        sys.stderr = StreamProxy(self.writer, "err", self)
        sys.stdin = io.StringIO("")  # input() inside a cell hits EOF, not the frame channel
        while True:
            try:
                item = self.inbox.get()
            except KeyboardInterrupt:
                continue
            if item is None:
                return
            frame_type, seq, payload = item
            if frame_type == "exec":
                self.run_cell(seq, payload.get("source", ""))
            elif frame_type == "bad":
                self.writer.send(
                    "status",
                    seq,
                    {
                        "outcome": "exception",
                        "error": payload,
                        "protocol_error": True,
                        "total_output_bytes": 0,
                        "wall_ms": 0,
                    },
                )
            else:
                self.writer.send(
                    "status",
                    seq,
                    {
                        "outcome": "exception",
                        "error": f"protocol-error: unexpected frame type {frame_type!r}",
                        "protocol_error": True,
                        "total_output_bytes": 0,
                        "wall_ms": 0,
                    },
                )


def _read_exact(stream, n: int):
    data = b""
    while len(data) < n:
        piece = stream.read(n - len(data))
        if not piece:
            return None
        data += piece
    return data


if __name__ == "__main__":
    Runner().serve()

"""Host-side sessions: spawn a guest, feed it cells, police budgets and monitors.

A session owns one guest process and one workspace directory. Cells run
sequentially; each returns an ExecutionOutcome. All guest traffic travels
over the framed-JSON protocol documented in PROTOCOL.md.
"""

from __future__ import annotations

import json
import os
import queue
import signal
import subprocess
import sys
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..errors import SandboxError
from .budget import Budget, RunUsage, truncate_output
from .protocol import (
    ERR,
    EXEC,
    HANDSHAKE,
    INTERRUPT,
    OUT,
    STATUS,
    Frame,
    read_frame,
    write_frame,
)

GUEST_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "guest.py")

OPEN = "open"
BUSY = "busy"
CLOSED = "closed"
DEAD = "dead"

STATUS_OK = "ok"
STATUS_ERROR = "error"
STATUS_TIMEOUT = "timeout"
STATUS_MONITOR = "killed_by_monitor"
STATUS_GUEST_DEAD = "guest_dead"

MONITOR_CONTINUE = "CONTINUE"
MONITOR_STOP = "STOP"

INTERRUPT_GRACE = 10.0
CLOSE_GRACE = 10.0


@dataclass
class ExecutionOutcome:
    """What one cell did: status, captured streams, and accounting."""

    status: str
    output: str
    error: Optional[str]
    wall_time: float
    output_bytes: int
    frames_complete: bool

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass
class Session:
    session_id: str
    workspace: str
    working_dir: str
    input_dir: str
    budget: Budget
    run_usage: Optional[RunUsage]
    deterministic: bool
    proc: subprocess.Popen
    guest_pid: int
    state: str = OPEN
    elapsed: float = 0.0
    steps: int = 0
    next_seq: int = 1
    events: list = field(default_factory=list)
    mount_names: tuple = ()
    _inbox: "queue.Queue[Optional[Frame]]" = field(default_factory=queue.Queue)
    _reader: Optional[threading.Thread] = None
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def alive(self) -> bool:
        return self.state in (OPEN, BUSY) and self.proc.poll() is None


def open_session(
    workspace: str,
    input_mounts: Optional[dict] = None,
    budget: Optional[Budget] = None,
    guest_cmd: Optional[Sequence[str]] = None,
    run_usage: Optional[RunUsage] = None,
    session_id: Optional[str] = None,
    deterministic: bool = False,
    handshake_timeout: float = 30.0,
) -> Session:
    """Start a guest process rooted at ``workspace`` and wait for its handshake.

    ``input_mounts`` maps names to existing host paths; each becomes a
    symlink under ``workspace/input/<name>`` so cells see read-only inputs
    at stable relative locations.
    """
    budget = budget or Budget()
    workspace = os.path.abspath(workspace)
    working_dir = os.path.join(workspace, "working")
    input_dir = os.path.join(workspace, "input")
    os.makedirs(working_dir, exist_ok=True)
    os.makedirs(input_dir, exist_ok=True)

    mount_names = []
    for name, source in sorted((input_mounts or {}).items()):
        source = os.path.abspath(source)
        if not os.path.exists(source):
            raise SandboxError(f"input mount {name!r} points at missing path: {source}")
        link = os.path.join(input_dir, name)
        if os.path.lexists(link):
            os.unlink(link)
        os.symlink(source, link)
        mount_names.append(name)

    cmd = list(guest_cmd) if guest_cmd else [sys.executable, "-u", GUEST_PATH]
    stderr_log = open(os.path.join(workspace, "guest_stderr.log"), "ab")
    try:
        proc = subprocess.Popen(
            cmd,
            cwd=working_dir,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=stderr_log,
            start_new_session=True,
        )
    finally:
        stderr_log.close()

    session = Session(
        session_id=session_id or f"session-{uuid.uuid4().hex[:12]}",
        workspace=workspace,
        working_dir=working_dir,
        input_dir=input_dir,
        budget=budget,
        run_usage=run_usage,
        deterministic=deterministic,
        proc=proc,
        guest_pid=proc.pid,
        mount_names=tuple(mount_names),
    )

    reader = threading.Thread(target=_reader_loop, args=(session,), daemon=True)
    session._reader = reader
    reader.start()

    frame = _next_frame(session, timeout=handshake_timeout)
    if frame is None or frame.type != HANDSHAKE:
        _force_kill(session)
        session.state = DEAD
        raise SandboxError(
            f"guest failed to hand shake within {handshake_timeout:.0f}s "
            f"(got {frame.type if frame else 'EOF'})"
        )
    session.events.append(
        {
            "event": "open",
            "session_id": session.session_id,
            "runtime": frame.payload.get("runtime"),
            "mounts": list(session.mount_names),
        }
    )
    return session


def execute_cell(
    session: Session,
    code: str,
    goal: str = "",
    monitor: Optional[Callable[[str, str], str]] = None,
    poll_interval: float = 30.0,
    cell_wall: Optional[float] = None,
) -> ExecutionOutcome:
    """Run one cell to completion, a timeout, or a monitor stop.

    The monitor callable receives (goal, output_so_far) roughly every
    ``poll_interval`` seconds and answers CONTINUE or STOP. Monitor failures
    are logged and treated as CONTINUE: an advisory observer must never be
    able to wedge a run.
    """
    with session._lock:
        if session.state != OPEN:
            raise SandboxError(f"session {session.session_id} is {session.state}, cannot execute")
        if not session.alive():
            session.state = DEAD
            raise SandboxError(f"guest process for {session.session_id} has exited")
        session.state = BUSY
        seq = session.next_seq
        session.next_seq += 1

    limit = session.budget.cell_wall if cell_wall is None else cell_wall
    started = time.monotonic()
    out_parts: list = []
    guest_status: Optional[dict] = None
    reason: Optional[str] = None
    interrupted_at: Optional[float] = None
    next_poll = started + poll_interval
    monitor_warned = False

    try:
        write_frame(session.proc.stdin, Frame(EXEC, seq, {"source": code, "goal": goal}))
    except (BrokenPipeError, OSError):
        session.state = DEAD
        return _finish(session, seq, goal, STATUS_GUEST_DEAD, "", "guest pipe is closed",
                       0.0, 0, False)

    while True:
        now = time.monotonic()
        if guest_status is None and reason is None:
            if now - started > limit:
                reason = STATUS_TIMEOUT
                _send_interrupt(session, seq)
                interrupted_at = now
            elif monitor is not None and now >= next_poll:
                next_poll = now + poll_interval
                try:
                    verdict = monitor(goal, "".join(out_parts))
                except Exception as exc:
                    verdict = MONITOR_CONTINUE
                    if not monitor_warned:
                        monitor_warned = True
                        session.events.append(
                            {"event": "monitor_error", "seq": seq, "detail": repr(exc)}
                        )
                if verdict == MONITOR_STOP:
                    reason = STATUS_MONITOR
                    _send_interrupt(session, seq)
                    interrupted_at = time.monotonic()

        if reason is not None and guest_status is None and interrupted_at is not None:
            if time.monotonic() - interrupted_at > INTERRUPT_GRACE:
                _force_kill(session)
                session.state = DEAD
                break

        frame = _next_frame(session, timeout=0.05)
        if frame is None:
            if not session.alive() and session._inbox.empty():
                if reason is None:
                    reason = STATUS_GUEST_DEAD
                session.state = DEAD
                break
            continue
        if frame.type in (OUT, ERR) and frame.seq == seq:
            out_parts.append(frame.payload.get("text", ""))
        elif frame.type == STATUS and frame.seq == seq:
            guest_status = frame.payload
            break
        # frames for other seqs are stale leftovers; drop them

    wall = time.monotonic() - started
    output = "".join(out_parts)
    sent_bytes = len(output.encode("utf-8"))

    if guest_status is not None:
        claimed = int(guest_status.get("total_output_bytes", -1))
        frames_complete = claimed == sent_bytes
        if reason is not None:
            status, error = reason, guest_status.get("error") or "interrupted"
        elif guest_status.get("outcome") == "ok":
            status, error = STATUS_OK, None
        else:
            status, error = STATUS_ERROR, guest_status.get("error")
    else:
        frames_complete = False
        status = reason or STATUS_GUEST_DEAD
        error = "guest produced no status frame"

    return _finish(session, seq, goal, status, output, error, wall, sent_bytes,
                   frames_complete)


def close_session(session: Session) -> None:
    """Shut the guest down (gently, then not) and write the transcript."""
    if session.state == CLOSED:
        return
    was_dead = session.state == DEAD
    session.state = CLOSED
    if not was_dead and session.proc.poll() is None:
        try:
            session.proc.stdin.close()
        except Exception:
            pass
        try:
            session.proc.wait(timeout=CLOSE_GRACE)
        except subprocess.TimeoutExpired:
            _signal_group(session, signal.SIGTERM)
            try:
                session.proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                _signal_group(session, signal.SIGKILL)
                session.proc.wait()
    elif session.proc.poll() is None:
        _force_kill(session)
    session.events.append({"event": "close", "session_id": session.session_id})
    _write_transcript(session)


# --- internals ---


def _reader_loop(session: Session) -> None:
    stream = session.proc.stdout
    while True:
        try:
            frame = read_frame(stream)
        except SandboxError:
            break
        if frame is None:
            break
        session._inbox.put(frame)
    session._inbox.put(None)


def _next_frame(session: Session, timeout: float) -> Optional[Frame]:
    try:
        frame = session._inbox.get(timeout=timeout)
    except queue.Empty:
        return None
    return frame


def _send_interrupt(session: Session, seq: int) -> None:
    """Ask the guest to break the running cell: a frame plus a real SIGINT.

    The frame alone cannot preempt a busy exec loop, and a bare SIGINT to a
    guest stuck before its handler is installed would be lost; sending both
    covers either gap.
    """
    try:
        write_frame(session.proc.stdin, Frame(INTERRUPT, seq, {}))
    except Exception:
        pass
    try:
        session.proc.send_signal(signal.SIGINT)
    except Exception:
        pass


def _signal_group(session: Session, signum: int) -> None:
    try:
        os.killpg(os.getpgid(session.proc.pid), signum)
    except Exception:
        try:
            session.proc.send_signal(signum)
        except Exception:
            pass


def _force_kill(session: Session) -> None:
    _signal_group(session, signal.SIGKILL)
    try:
        session.proc.wait(timeout=5.0)
    except Exception:
        pass


def _finish(
    session: Session,
    seq: int,
    goal: str,
    status: str,
    output: str,
    error: Optional[str],
    wall: float,
    output_bytes: int,
    frames_complete: bool,
) -> ExecutionOutcome:
    display, truncated = truncate_output(output)
    session.elapsed += wall
    session.steps += 1
    if session.run_usage is not None:
        session.run_usage.add(wall)
    with session._lock:
        if session.state == BUSY:
            session.state = OPEN
    session.events.append(
        {
            "event": "cell",
            "seq": seq,
            "goal": goal,
            "status": status,
            "error": error,
            "output_bytes": output_bytes,
            "truncated": truncated,
            "wall_time": wall,
            "frames_complete": frames_complete,
        }
    )
    return ExecutionOutcome(
        status=status,
        output=display,
        error=error,
        wall_time=wall,
        output_bytes=output_bytes,
        frames_complete=frames_complete,
    )


def _write_transcript(session: Session) -> None:
    path = os.path.join(session.workspace, "transcript.jsonl")
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for event in session.events:
                record = dict(event)
                record.pop("pid", None)
                if session.deterministic:
                    for key in ("wall_time",):
                        if key in record:
                            record[key] = 0.0
                handle.write(json.dumps(record, sort_keys=True) + "\n")
    except OSError:
        pass

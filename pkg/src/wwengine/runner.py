"""Resource-limited subprocess execution.

Every make invocation (and external-source command) runs in its own process
group with:

  * niceness (+ io-priority reduction where the platform supports it),
  * RLIMIT_CPU and RLIMIT_FSIZE via setrlimit,
  * a watchdog thread enforcing the wall clock and the process-group size,
  * optional privilege drop to an unprivileged user when the engine runs
    as root (otherwise permission-based read-only exposure is meaningless).

The whole group is SIGKILLed on any limit trip; the kill loop re-scans for
stragglers so fork bombs cannot outrun it.
"""

from __future__ import annotations

import os
import pwd
import resource
import signal
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import psutil

STATUS_SUCCEEDED = "succeeded"
STATUS_FAILED = "failed"
STATUS_KILLED_TIMEOUT = "killed_timeout"
STATUS_KILLED_LIMIT = "killed_limit"
STATUS_KILLED = "killed"  # external kill (job kill / shutdown)

WATCHDOG_INTERVAL = 0.05
TRUNCATION_MARKER = b"\n[log truncated]\n"


@dataclass
class RunOutcome:
    status: str
    exit_code: int | None
    log: bytes
    duration: float


def _resolve_build_user(username: str):
    try:
        entry = pwd.getpwnam(username)
        return entry.pw_uid, entry.pw_gid
    except KeyError:
        return None


def kill_process_group(pgid: int, first_signal=signal.SIGKILL) -> None:
    """Kill every process in the group, re-scanning until none survive."""
    deadline = time.monotonic() + 10.0
    while time.monotonic() < deadline:
        survivors = _group_pids(pgid)
        if not survivors:
            return
        try:
            os.killpg(pgid, first_signal)
        except (ProcessLookupError, PermissionError):
            pass
        for pid in survivors:
            try:
                os.kill(pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                pass
        time.sleep(0.02)


def _group_pids(pgid: int) -> list:
    pids = []
    for proc in psutil.process_iter(["pid", "status"]):
        try:
            # Zombies cannot run; counting them would stall the kill loop
            # until init reaps the orphans.
            if proc.info["status"] == psutil.STATUS_ZOMBIE:
                continue
            if os.getpgid(proc.pid) == pgid:
                pids.append(proc.pid)
        except (ProcessLookupError, psutil.Error, PermissionError):
            continue
    return pids


def count_group_processes(pgid: int) -> int:
    return len(_group_pids(pgid))


class RunHandle:
    """Registration handle allowing an in-flight run to be killed externally."""

    def __init__(self):
        self._killed = threading.Event()
        self.pgid: int | None = None

    def kill(self):
        self._killed.set()
        if self.pgid is not None:
            kill_process_group(self.pgid)

    @property
    def kill_requested(self) -> bool:
        return self._killed.is_set()


def run_limited(cmd, cwd, env, limits, *, drop_to_user=None,
                log_file: Path | None = None, log_cap: int = 1024 * 1024,
                handle: RunHandle | None = None) -> RunOutcome:
    """Run cmd under the given ResourceLimits; never raises on recipe failure."""
    handle = handle or RunHandle()
    drop = _resolve_build_user(drop_to_user) if drop_to_user else None

    def preexec():
        os.setsid()
        try:
            os.nice(limits.niceness)
        except OSError:
            pass
        resource.setrlimit(resource.RLIMIT_CPU,
                           (limits.cpu_seconds, limits.cpu_seconds + 1))
        resource.setrlimit(resource.RLIMIT_FSIZE,
                           (limits.max_output_bytes_per_file,
                            limits.max_output_bytes_per_file))
        if drop is not None:
            uid, gid = drop
            os.setgroups([])
            os.setgid(gid)
            os.setuid(uid)
            # Backstop only; the watchdog enforces max_processes precisely.
            backstop = max(limits.max_processes * 5, 100)
            try:
                resource.setrlimit(resource.RLIMIT_NPROC, (backstop, backstop))
            except (ValueError, OSError):
                pass

    start = time.monotonic()
    proc = subprocess.Popen(
        cmd, cwd=str(cwd), env=env,
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
        stdin=subprocess.DEVNULL, preexec_fn=preexec,
    )
    pgid = proc.pid  # setsid makes the child its own group leader
    handle.pgid = pgid
    try:
        psutil.Process(proc.pid).ionice(psutil.IOPRIO_CLASS_IDLE)
    except (psutil.Error, OSError, AttributeError):
        pass

    verdict = {"status": None}
    done = threading.Event()

    def watchdog():
        while not done.is_set():
            elapsed = time.monotonic() - start
            if handle.kill_requested:
                verdict["status"] = STATUS_KILLED
            elif elapsed > limits.wall_seconds:
                verdict["status"] = STATUS_KILLED_TIMEOUT
            elif count_group_processes(pgid) > limits.max_processes:
                verdict["status"] = STATUS_KILLED_LIMIT
            elif proc.poll() is not None:
                # make exited but a backgrounded child still holds the pipe;
                # recipes may not outlive their make.
                if count_group_processes(pgid) > 0:
                    kill_process_group(pgid)
                return
            if verdict["status"]:
                kill_process_group(pgid)
                return
            done.wait(WATCHDOG_INTERVAL)

    watcher = threading.Thread(target=watchdog, daemon=True)
    watcher.start()

    chunks = []
    captured = 0
    truncated = False
    sink = open(log_file, "wb") if log_file else None
    try:
        while True:
            chunk = proc.stdout.read(1 << 14)
            if not chunk:
                break
            if sink:
                sink.write(chunk)
            if captured < log_cap:
                keep = chunk[: log_cap - captured]
                chunks.append(keep)
                captured += len(keep)
                if len(keep) < len(chunk):
                    truncated = True
            else:
                truncated = True
    finally:
        if sink:
            sink.close()
        proc.stdout.close()
    exit_code = proc.wait()
    done.set()
    watcher.join(timeout=5)
    kill_process_group(pgid)  # reap any recipe-orphaned background children
    duration = time.monotonic() - start

    log = b"".join(chunks)
    if truncated:
        log += TRUNCATION_MARKER

    status = verdict["status"]
    if status is None:
        if handle.kill_requested:
            status = STATUS_KILLED
        elif exit_code == 0:
            status = STATUS_SUCCEEDED
        elif exit_code is not None and exit_code < 0 and -exit_code == signal.SIGXCPU:
            status = STATUS_KILLED_LIMIT
        else:
            status = STATUS_FAILED
    return RunOutcome(status=status, exit_code=exit_code, log=log, duration=duration)

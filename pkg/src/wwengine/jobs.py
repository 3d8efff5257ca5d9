"""Background make jobs: an in-process worker pool over job sessions.

Each job gets its own session (a copy of the persistent directory, same as
previews), so running jobs never touch the persistent tree; merging a
finished job reuses the session merge semantics.
"""

from __future__ import annotations

import json
import queue
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import runner
from .errors import JobStillRunning, NoSuchJob, NoSuchProject, QueueFull
from .util import atomic_write_json
from .workspace import MakeResult

TERMINAL_STATES = ("succeeded", "failed", "killed")
JOB_LOG_NAME = ".ww-job.log"


@dataclass
class Job:
    id: str
    project: str
    target: str
    state: str  # queued | running | succeeded | failed | killed
    session_id: str
    submitted_at: float
    started_at: float | None = None
    ended_at: float | None = None
    result: MakeResult | None = None
    merged: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "project": self.project,
            "target": self.target,
            "state": self.state,
            "session_id": self.session_id,
            "submitted_at": self.submitted_at,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "merged": self.merged,
            "result": self.result.to_dict() if self.result else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Job":
        result = d.get("result")
        if result:
            result = MakeResult(
                target=result["target"], status=result["status"],
                exit_code=result["exit_code"],
                log=result["log"].encode("utf-8"),
                duration=result["duration"],
                files_changed=result["files_changed"])
        return cls(id=d["id"], project=d["project"], target=d["target"],
                   state=d["state"], session_id=d["session_id"],
                   submitted_at=d["submitted_at"], started_at=d.get("started_at"),
                   ended_at=d.get("ended_at"), result=result,
                   merged=d.get("merged", False))


class JobManager:
    def __init__(self, config, store, sessions, workspace):
        self.config = config
        self.store = store
        self.sessions = sessions
        self.workspace = workspace
        self.jobs_dir = Path(config.root) / "jobs"
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self._jobs = {}
        self._kill_flags = {}
        self._mutex = threading.RLock()
        self._queue = queue.Queue()
        self._workers = []
        self._stopping = threading.Event()
        self._recover()

    # -- lifecycle of the manager ------------------------------------------

    def start_workers(self):
        for i in range(self.config.max_concurrent_jobs):
            t = threading.Thread(target=self._worker_loop,
                                 name="ww-job-worker-%d" % i, daemon=True)
            t.start()
            self._workers.append(t)

    def stop_workers(self):
        self._stopping.set()
        for _ in self._workers:
            self._queue.put(None)
        for t in self._workers:
            t.join(timeout=5)
        self._workers = []

    def _recover(self):
        """Load persisted records; running jobs died with the old process."""
        for f in sorted(self.jobs_dir.glob("*.json")):
            try:
                job = Job.from_dict(json.loads(f.read_text()))
            except (ValueError, KeyError):
                continue
            if job.state == "running":
                job.state = "killed"
                job.ended_at = time.time()
                job.result = MakeResult(
                    target=job.target, status="killed", exit_code=None,
                    log=b"[job was running when the service stopped]\n",
                    duration=0.0)
                self._persist(job)
            self._jobs[job.id] = job
            if job.state == "queued":
                self._queue.put(job.id)

    # -- persistence ----------------------------------------------------------

    def _persist(self, job: Job) -> None:
        atomic_write_json(self.jobs_dir / (job.id + ".json"), job.to_dict())

    # -- operations --------------------------------------------------------------

    def start_job(self, project: str, target: str, limits=None) -> Job:
        if not self.store.project_exists(project):
            raise NoSuchProject("no project named %r" % project)
        with self._mutex:
            queued = sum(1 for j in self._jobs.values() if j.state == "queued")
            if queued >= self.config.max_queue:
                raise QueueFull("job queue is full (%d queued)" % queued)
            session = self.sessions.create([project], kind="job")
            job = Job(id=secrets.token_hex(8), project=project, target=target,
                      state="queued", session_id=session.id,
                      submitted_at=time.time())
            self._jobs[job.id] = job
            self._limits_by_job = getattr(self, "_limits_by_job", {})
            self._limits_by_job[job.id] = limits
            self._persist(job)
        self._queue.put(job.id)
        return job

    def get_job(self, job_id: str) -> Job:
        with self._mutex:
            if job_id not in self._jobs:
                raise NoSuchJob("no job %r" % job_id)
            return self._jobs[job_id]

    def job_log_tail(self, job_id: str, max_bytes: int = 64 * 1024) -> bytes:
        job = self.get_job(job_id)
        log_path = self.sessions.sessions_dir / job.session_id / JOB_LOG_NAME
        if not log_path.exists():
            return b""
        data = log_path.read_bytes()
        return data[-max_bytes:]

    def list_jobs(self, project: str | None = None) -> list:
        with self._mutex:
            jobs = [j for j in self._jobs.values()
                    if project is None or j.project == project]
        return sorted(jobs, key=lambda j: j.submitted_at, reverse=True)

    def kill_job(self, job_id: str) -> Job:
        job = self.get_job(job_id)
        with self._mutex:
            if job.state in TERMINAL_STATES:
                return job
            self._kill_flags[job_id] = True
            if job.state == "queued":
                job.state = "killed"
                job.ended_at = time.time()
                job.result = MakeResult(
                    target=job.target, status="killed", exit_code=None,
                    log=b"[killed before start]\n", duration=0.0)
                self._persist(job)
                return job
        # Running: terminate the process group; the worker finalizes state.
        # Re-kill in a loop to close the window between the worker marking
        # the job running and registering its run handle.
        deadline = time.monotonic() + 5.0
        while time.monotonic() < deadline and job.state not in TERMINAL_STATES:
            self.workspace.kill_session_runs(job.session_id)
            time.sleep(0.02)
        return job

    def merge_job(self, job_id: str):
        job = self.get_job(job_id)
        if job.state not in TERMINAL_STATES:
            raise JobStillRunning("job %s is %s" % (job_id, job.state))
        report = self.sessions.merge(job.session_id, destroy_after=False)
        with self._mutex:
            job.merged = True
            self._persist(job)
        return report

    def destroy_job(self, job_id: str) -> None:
        job = self.get_job(job_id)
        if job.state not in TERMINAL_STATES:
            raise JobStillRunning("job %s is %s" % (job_id, job.state))
        try:
            self.sessions.destroy(job.session_id)
        except Exception:
            pass
        with self._mutex:
            self._jobs.pop(job_id, None)
            self._kill_flags.pop(job_id, None)
        record = self.jobs_dir / (job_id + ".json")
        if record.exists():
            record.unlink()

    def kill_jobs_of_project(self, project: str) -> None:
        for job in self.list_jobs(project):
            self.kill_job(job.id)

    def destroy_jobs_of_project(self, project: str) -> None:
        self.kill_jobs_of_project(project)
        for job in self.list_jobs(project):
            with self._mutex:
                self._jobs.pop(job.id, None)
            record = self.jobs_dir / (job.id + ".json")
            if record.exists():
                record.unlink()

    # -- worker -------------------------------------------------------------------

    def _worker_loop(self):
        while not self._stopping.is_set():
            job_id = self._queue.get()
            if job_id is None:
                return
            try:
                self._run_job(job_id)
            except Exception:
                # A crashed worker must not take the pool down; the job is
                # marked failed below if it got as far as running.
                with self._mutex:
                    job = self._jobs.get(job_id)
                    if job and job.state == "running":
                        job.state = "failed"
                        job.ended_at = time.time()
                        job.result = MakeResult(
                            target=job.target, status="failed", exit_code=None,
                            log=b"[internal executor error]\n", duration=0.0)
                        self._persist(job)

    def _run_job(self, job_id: str):
        with self._mutex:
            job = self._jobs.get(job_id)
            if job is None or job.state != "queued":
                return  # killed or destroyed while queued
            job.state = "running"
            job.started_at = time.time()
            self._persist(job)
            limits = getattr(self, "_limits_by_job", {}).pop(job_id, None)

        handle = runner.RunHandle()
        if self._kill_flags.get(job_id):
            with self._mutex:
                job.state = "killed"
                job.ended_at = time.time()
                job.result = MakeResult(target=job.target, status="killed",
                                        exit_code=None,
                                        log=b"[killed before start]\n",
                                        duration=0.0)
                self._persist(job)
            return
        try:
            self.workspace.sync(job.project, job.session_id)
            result = self.workspace.make_target(
                job.project, job.session_id, job.target,
                limits=limits, handle=handle)
        except Exception as e:
            result = MakeResult(target=job.target, status="failed",
                                exit_code=None,
                                log=("[job error] %s\n" % e).encode(),
                                duration=0.0)

        log_path = self.sessions.sessions_dir / job.session_id / JOB_LOG_NAME
        try:
            log_path.write_bytes(result.log)
        except OSError:
            pass

        with self._mutex:
            killed = self._kill_flags.get(job_id) or result.status == "killed"
            if killed:
                job.state = "killed"
            elif result.status == "succeeded":
                job.state = "succeeded"
            else:
                job.state = "failed"
            job.ended_at = time.time()
            job.result = result
            self._persist(job)

"""Materialize sources into working directories, run make, serve files."""

from __future__ import annotations

import json
import os
import pwd
import shutil
import stat
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import runner
from .errors import (FileNotFound, IoFailure, LimitExceeded, MakeFailed,
                     MakeUnavailable, NoSuchProject)
from .sessions import INTERNAL_FILES, PERSISTENT_ID
from .util import (atomic_write_json, dir_size_bytes, hash_tree, sha256_bytes,
                   sha256_file, walk_rel_files)

SYNC_MANIFEST = ".ww-sync.json"


@dataclass
class SyncReport:
    written: list
    deleted: list
    unchanged: list

    def to_dict(self):
        return {"written": self.written, "deleted": self.deleted,
                "unchanged": self.unchanged}


@dataclass
class MakeResult:
    target: str
    status: str  # succeeded | failed | killed_timeout | killed_limit | killed
    exit_code: int | None
    log: bytes
    duration: float
    files_changed: list = field(default_factory=list)

    def to_dict(self):
        return {
            "target": self.target,
            "status": self.status,
            "exit_code": self.exit_code,
            "log": self.log.decode("utf-8", "replace"),
            "duration": self.duration,
            "files_changed": self.files_changed,
        }


@dataclass
class FileView:
    path: str
    media_type: str
    mtime: float
    size: int
    bytes: bytes | None = None

    def to_dict(self):
        return {"path": self.path, "media_type": self.media_type,
                "mtime": self.mtime, "size": self.size}


class Workspace:
    def __init__(self, config, store, sessions, locks, busy):
        self.config = config
        self.store = store
        self.sessions = sessions
        self.locks = locks
        self.busy = busy
        self.deps = None  # wired by Engine
        self._handles = {}  # session_id -> set of RunHandle
        self._handles_mutex = threading.Lock()
        self.ww_dir = Path(config.root) / "ww"
        self.logs_dir = Path(config.root) / "logs"

    # -- locks ---------------------------------------------------------------

    def workdir_lock(self, project: str, session_id: str):
        if session_id == PERSISTENT_ID:
            return self.sessions.persistent_lock(project)
        return self.locks.get(("workdir", project, session_id))

    # -- sync ------------------------------------------------------------------

    def sync(self, project: str, session_id: str) -> SyncReport:
        with self.workdir_lock(project, session_id):
            return self.sync_unlocked(project, session_id)

    def sync_unlocked(self, project: str, session_id: str) -> SyncReport:
        sources = self.store.list_sources(project)  # raises NoSuchProject
        workdir = self.sessions.working_dir(project, session_id)
        workdir.mkdir(parents=True, exist_ok=True)
        detached = [d.rstrip("/") for d in
                    self.store.get_project(project).options.detached_subdirs]
        manifest_path = workdir / SYNC_MANIFEST
        previous = {}
        if manifest_path.exists():
            try:
                previous = json.loads(manifest_path.read_text())
            except (OSError, ValueError):
                previous = {}

        written, deleted, unchanged = [], [], []
        new_manifest = {}
        try:
            for rel in sorted(sources):
                if session_id != PERSISTENT_ID and _under_any(rel, detached):
                    # Detached paths are shared by reference with the
                    # persistent dir; only the persistent sync touches them.
                    continue
                content = self.store.get_source_file(project, rel).content
                digest = sha256_bytes(content)
                dest = workdir / rel
                if dest.is_file() and sha256_file(dest) == digest:
                    unchanged.append(rel)
                else:
                    dest.parent.mkdir(parents=True, exist_ok=True)
                    dest.write_bytes(content)
                    written.append(rel)
                new_manifest[rel] = digest
            for rel in sorted(previous):
                if rel in new_manifest:
                    continue
                victim = workdir / rel
                if victim.is_file():
                    victim.unlink()
                deleted.append(rel)
            atomic_write_json(manifest_path, new_manifest)
        except OSError as e:
            raise IoFailure("sync failed: %s" % e)
        return SyncReport(written=written, deleted=deleted, unchanged=unchanged)

    # -- make ------------------------------------------------------------------

    @property
    def central_makefile(self) -> Path:
        if self.config.central_makefile is not None:
            return self.config.central_makefile
        return self.ww_dir / "central.mk"

    def make_target(self, project: str, session_id: str, target: str,
                    limits=None, handle: runner.RunHandle | None = None) -> MakeResult:
        from . import names
        target = names.validate_rel_path(target)
        limits = limits or self.config.limits
        make_exe = shutil.which(self.config.make_executable)
        if make_exe is None:
            raise MakeUnavailable("no %r executable on PATH" % self.config.make_executable)

        with self.workdir_lock(project, session_id):
            workdir = self.sessions.working_dir(project, session_id)
            workdir.mkdir(parents=True, exist_ok=True)
            if dir_size_bytes(workdir) > limits.max_dir_bytes:
                raise LimitExceeded(
                    "working directory over quota (%d bytes); make refused"
                    % limits.max_dir_bytes)

            prep = self.deps.prepare(project, session_id)
            env = self._make_env(project, session_id, prep.env)
            cmd = [make_exe, "-f", str(self.central_makefile)]
            if (workdir / "Makefile").is_file():
                cmd += ["-f", "Makefile"]
            cmd.append(target)

            readonly = list(prep.readonly_dirs)
            ref = self.sessions.get(session_id)
            if ref.kind != "persistent":
                for d in self.store.get_project(project).options.detached_subdirs:
                    tgt = self.sessions.persistent_dir(project) / d.rstrip("/")
                    if tgt.exists():
                        readonly.append(tgt)

            drop_user = (self.config.build_user
                         if self.config.should_drop_privileges else None)
            if drop_user:
                _grant_tree_to_user(workdir, drop_user, skip=readonly)

            before = hash_tree(workdir, exclude=INTERNAL_FILES)
            log_path = self._log_path(project, session_id)
            handle = handle or runner.RunHandle()
            self._register_handle(session_id, handle)
            self.busy.enter(session_id)
            started = time.time()
            try:
                with _readonly_exposure(readonly):
                    outcome = runner.run_limited(
                        cmd, cwd=workdir, env=env, limits=limits,
                        drop_to_user=drop_user, log_file=log_path,
                        log_cap=self.config.log_cap_bytes, handle=handle)
            finally:
                self.busy.leave(session_id)
                self._unregister_handle(session_id, handle)

            after = hash_tree(workdir, exclude=INTERNAL_FILES)
            changed = sorted(set(
                [rel for rel, h in after.items() if before.get(rel) != h] +
                [rel for rel in before if rel not in after]))

            status, exit_code, log = outcome.status, outcome.exit_code, outcome.log
            if status == runner.STATUS_SUCCEEDED and \
                    dir_size_bytes(workdir) > limits.max_dir_bytes:
                status = runner.STATUS_FAILED
                exit_code = None
                log += b"\n[working directory exceeds the disk quota]\n"
            return MakeResult(target=target, status=status, exit_code=exit_code,
                              log=log, duration=outcome.duration,
                              files_changed=changed)

    def _make_env(self, project: str, session_id: str, dep_env: dict) -> dict:
        env = {
            "PATH": os.environ.get("PATH", "/usr/local/bin:/usr/bin:/bin"),
            "LANG": "C.UTF-8",
            "TMPDIR": os.environ.get("TMPDIR", "/tmp"),
            "WW_PROJECT": project,
            "WW_SESSION": session_id,
            "WW_HELPERS": str(self.ww_dir / "helpers"),
        }
        env.update(dep_env)
        env.update(self.config.extra_env)
        return env

    def _log_path(self, project: str, session_id: str) -> Path:
        d = self.logs_dir / session_id
        d.mkdir(parents=True, exist_ok=True)
        return d / ("%s-%d.log" % (project.replace("/", "_"), time.time_ns()))

    # -- kill support (used by jobs) --------------------------------------------

    def _register_handle(self, session_id, handle):
        with self._handles_mutex:
            self._handles.setdefault(session_id, set()).add(handle)

    def _unregister_handle(self, session_id, handle):
        with self._handles_mutex:
            self._handles.get(session_id, set()).discard(handle)

    def kill_session_runs(self, session_id: str) -> None:
        with self._handles_mutex:
            handles = list(self._handles.get(session_id, ()))
        for h in handles:
            h.kill()

    # -- serving ------------------------------------------------------------------

    def get_file(self, project: str, session_id: str, path: str,
                 make_first: bool = False, limits=None) -> FileView:
        from . import names
        path = names.validate_rel_path(path)
        if not self.store.project_exists(project):
            raise NoSuchProject("no project named %r" % project)
        with self.workdir_lock(project, session_id):
            if make_first:
                self.sync_unlocked(project, session_id)
                result = self.make_target(project, session_id, path, limits=limits)
                if result.status != runner.STATUS_SUCCEEDED:
                    raise MakeFailed("make %s %s" % (path, result.status),
                                     result=result)
            workdir = self.sessions.working_dir(project, session_id)
            full = workdir / path
            if not full.is_file():
                raise FileNotFound("%s has no file %r" % (project, path))
            st = full.stat()
            return FileView(path=path, media_type=self.config.media_type_for(path),
                            mtime=st.st_mtime, size=st.st_size,
                            bytes=full.read_bytes())

    def list_files(self, project: str, session_id: str) -> list:
        if not self.store.project_exists(project):
            raise NoSuchProject("no project named %r" % project)
        workdir = self.sessions.working_dir(project, session_id)
        views = []
        if workdir.exists():
            for rel in walk_rel_files(workdir, exclude=INTERNAL_FILES):
                st = (workdir / rel).stat()
                views.append(FileView(path=rel,
                                      media_type=self.config.media_type_for(rel),
                                      mtime=st.st_mtime, size=st.st_size))
        return views


def _under_any(rel: str, tops: list) -> bool:
    return any(rel == top or rel.startswith(top + "/") for top in tops)


@contextmanager
def _readonly_exposure(paths):
    """Strip write bits from the given trees for the duration of a build."""
    saved = []
    try:
        for root in paths:
            for dirpath, dirnames, filenames in os.walk(root):
                for name in dirnames + filenames:
                    p = os.path.join(dirpath, name)
                    if os.path.islink(p):
                        continue
                    mode = stat.S_IMODE(os.stat(p).st_mode)
                    saved.append((p, mode))
                    os.chmod(p, mode & ~0o222)
            mode = stat.S_IMODE(os.stat(root).st_mode)
            saved.append((str(root), mode))
            os.chmod(root, mode & ~0o222)
        yield
    finally:
        for p, mode in reversed(saved):
            try:
                os.chmod(p, mode)
            except OSError:
                pass


def _grant_tree_to_user(root: Path, username: str, skip=()) -> None:
    """Hand a working tree to the build user so recipes can write it."""
    try:
        entry = pwd.getpwnam(username)
    except KeyError:
        return
    skip_strs = {str(s) for s in skip}
    for dirpath, dirnames, filenames in os.walk(root):
        if dirpath in skip_strs:
            dirnames[:] = []
            continue
        for name in dirnames + filenames:
            p = os.path.join(dirpath, name)
            if os.path.islink(p):
                continue
            try:
                os.chown(p, entry.pw_uid, entry.pw_gid)
            except OSError:
                pass
    try:
        os.chown(root, entry.pw_uid, entry.pw_gid)
    except OSError:
        pass

"""Working-directory sessions: persistent, preview, and job universes.

A session owns one working directory per project.  Preview and job sessions
start as copies of the persistent directories (detached subdirectories are
symlinked in place rather than copied) and record a content-hash snapshot,
which later drives the merge back into the persistent directories.
"""

from __future__ import annotations

import os
import secrets
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IoFailure, NoSuchProject, NoSuchSession, SessionBusy
from .util import (LockRegistry, atomic_write_json, hash_tree, sha256_file,
                   walk_rel_files)

PERSISTENT_ID = "persistent"

# Engine bookkeeping files living inside working dirs; never part of
# snapshots, merges, listings, or exports.
INTERNAL_FILES = (".ww-sync.json", ".ww-job.log")


@dataclass
class SessionRef:
    id: str
    kind: str  # persistent | preview | job
    projects: list
    created_at: float
    snapshot: dict = field(default_factory=dict)  # project -> {rel: sha256}

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "projects": self.projects,
                "created_at": self.created_at, "snapshot": self.snapshot}

    @classmethod
    def from_dict(cls, d: dict) -> "SessionRef":
        return cls(**d)


@dataclass
class MergeReport:
    copied: list
    skipped_conflicts: list

    def to_dict(self) -> dict:
        return {"copied": self.copied, "skipped_conflicts": self.skipped_conflicts}


class BusyTracker:
    """Counts in-flight makes per session so merge/destroy can refuse."""

    def __init__(self):
        import threading
        self._mutex = threading.Lock()
        self._counts = {}

    def enter(self, session_id: str):
        with self._mutex:
            self._counts[session_id] = self._counts.get(session_id, 0) + 1

    def leave(self, session_id: str):
        with self._mutex:
            self._counts[session_id] -= 1
            if self._counts[session_id] == 0:
                del self._counts[session_id]

    def is_busy(self, session_id: str) -> bool:
        with self._mutex:
            return self._counts.get(session_id, 0) > 0


class SessionManager:
    def __init__(self, root: Path, store, locks: LockRegistry, busy: BusyTracker):
        self.root = Path(root)
        self.store = store
        self.locks = locks
        self.busy = busy
        self.sessions_dir = self.root / "sessions"
        self.work_dir = self.root / "work"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.work_dir.mkdir(parents=True, exist_ok=True)

    # -- directories -------------------------------------------------------

    def persistent_dir(self, project: str) -> Path:
        if not self.store.project_exists(project):
            raise NoSuchProject("no project named %r" % project)
        d = self.work_dir / project
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _session_root(self, session_id: str) -> Path:
        return self.sessions_dir / session_id

    def _meta_path(self, session_id: str) -> Path:
        return self._session_root(session_id) / "meta.json"

    def working_dir(self, project: str, session_id: str) -> Path:
        """Directory where (project, session) builds happen."""
        if session_id == PERSISTENT_ID:
            return self.persistent_dir(project)
        ref = self.get(session_id)
        if project not in ref.projects:
            raise NoSuchSession(
                "session %s does not include project %r" % (session_id, project))
        return self._session_root(session_id) / "p" / project

    def persistent_lock(self, project: str):
        return self.locks.get(("persistent-writer", project))

    # -- lifecycle -----------------------------------------------------------

    def get(self, session_id: str) -> SessionRef:
        if session_id == PERSISTENT_ID:
            return SessionRef(id=PERSISTENT_ID, kind="persistent",
                              projects=self.store.list_projects(),
                              created_at=0.0, snapshot={})
        meta = self._meta_path(session_id)
        if not meta.exists():
            raise NoSuchSession("no session %r" % session_id)
        import json
        return SessionRef.from_dict(json.loads(meta.read_text()))

    def session_exists(self, session_id: str) -> bool:
        return session_id == PERSISTENT_ID or self._meta_path(session_id).exists()

    def list_sessions(self) -> list:
        out = []
        if self.sessions_dir.exists():
            for d in sorted(self.sessions_dir.iterdir()):
                if (d / "meta.json").exists():
                    out.append(self.get(d.name))
        return out

    def create(self, projects: list, kind: str = "preview") -> SessionRef:
        assert kind in ("preview", "job")
        for p in projects:
            if not self.store.project_exists(p):
                raise NoSuchProject("no project named %r" % p)
        session_id = secrets.token_hex(8)
        sroot = self._session_root(session_id)
        snapshot = {}
        try:
            for project in projects:
                src = self.persistent_dir(project)
                dst = sroot / "p" / project
                detached = self.store.get_project(project).options.detached_subdirs
                with self.persistent_lock(project):
                    self._copy_workdir(src, dst, detached)
                    snapshot[project] = hash_tree(dst, exclude=INTERNAL_FILES)
            ref = SessionRef(id=session_id, kind=kind, projects=list(projects),
                             created_at=time.time(), snapshot=snapshot)
            atomic_write_json(self._meta_path(session_id), ref.to_dict())
            return ref
        except OSError as e:
            shutil.rmtree(sroot, ignore_errors=True)
            raise IoFailure("session copy failed: %s" % e)

    def _copy_workdir(self, src: Path, dst: Path, detached: list) -> None:
        dst.mkdir(parents=True, exist_ok=True)
        detached_tops = [d.rstrip("/") for d in detached]
        for entry in sorted(os.listdir(src)):
            s, d = src / entry, dst / entry
            if entry in detached_tops:
                continue
            if s.is_symlink():
                continue
            if s.is_dir():
                shutil.copytree(s, d, symlinks=False)
            else:
                shutil.copy2(s, d)
        # Detached subdirectories are shared by reference, never copied.
        for rel in detached_tops:
            target = src / rel
            target.mkdir(parents=True, exist_ok=True)
            link = dst / rel
            link.parent.mkdir(parents=True, exist_ok=True)
            if not link.exists() and not link.is_symlink():
                os.symlink(target, link)

    # -- merge / destroy -----------------------------------------------------

    def merge(self, session_id: str, destroy_after: bool = True) -> MergeReport:
        ref = self.get(session_id)
        if ref.kind == "persistent":
            raise NoSuchSession("the persistent session cannot be merged")
        if self.busy.is_busy(session_id):
            raise SessionBusy("a make is running in session %s" % session_id)
        copied, conflicts = [], []
        for project in ref.projects:
            sdir = self._session_root(session_id) / "p" / project
            if not sdir.exists():
                continue
            pdir = self.persistent_dir(project)
            snap = ref.snapshot.get(project, {})
            with self.persistent_lock(project):
                for rel in walk_rel_files(sdir, exclude=INTERNAL_FILES):
                    s_hash = sha256_file(sdir / rel)
                    snap_hash = snap.get(rel)
                    if s_hash == snap_hash:
                        continue  # unchanged since the session began
                    pfile = pdir / rel
                    p_hash = sha256_file(pfile) if pfile.is_file() else None
                    if p_hash != snap_hash and p_hash != s_hash:
                        # Both sides diverged; the saved record wins.
                        conflicts.append(rel)
                        continue
                    pfile.parent.mkdir(parents=True, exist_ok=True)
                    shutil.copy2(sdir / rel, pfile)
                    copied.append(rel)
        if destroy_after:
            self.destroy(session_id)
        return MergeReport(copied=sorted(copied), skipped_conflicts=sorted(conflicts))

    def destroy(self, session_id: str) -> None:
        ref = self.get(session_id)
        if ref.kind == "persistent":
            raise NoSuchSession("the persistent session cannot be destroyed")
        if self.busy.is_busy(session_id):
            raise SessionBusy("a make is running in session %s" % session_id)
        shutil.rmtree(self._session_root(session_id), ignore_errors=True)

    def gc(self, max_age_seconds: float) -> list:
        """Destroy idle preview sessions older than max_age; return them."""
        collected = []
        now = time.time()
        for ref in self.list_sessions():
            if ref.kind != "preview":
                continue
            if now - ref.created_at < max_age_seconds:
                continue
            if self.busy.is_busy(ref.id):
                continue
            self.destroy(ref.id)
            collected.append(ref)
        return collected

    def destroy_sessions_of_project(self, project: str) -> None:
        for ref in self.list_sessions():
            if project in ref.projects:
                shutil.rmtree(self._session_root(ref.id), ignore_errors=True)
        pdir = self.work_dir / project
        if pdir.exists():
            shutil.rmtree(pdir, ignore_errors=True)

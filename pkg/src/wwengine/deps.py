"""Inter-project dependencies and external project sources.

Dependency edges live in each project's options.  ``prepare`` returns the
build order (prerequisites first), syncs every prerequisite into its own
persistent working directory, and hands the workspace the WW_DEP_*
environment plus the list of directories that must be exposed read-only.
"""

from __future__ import annotations

import io
import os
import shutil
import tarfile
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from . import names, runner
from .errors import CycleDetected, FetchFailed, LimitExceeded, NoSuchProject
from .util import hash_tree


def topological_order(start: str, edges_of) -> list:
    """DFS post-order from start: every prerequisite precedes its dependents.

    edges_of(name) -> list of prerequisite names.  Raises CycleDetected.
    """
    order, done, on_path = [], set(), set()

    def visit(node, stack):
        if node in done:
            return
        if node in on_path:
            raise CycleDetected(" -> ".join(stack + [node]))
        on_path.add(node)
        for dep in sorted(edges_of(node)):
            visit(dep, stack + [node])
        on_path.remove(node)
        done.add(node)
        order.append(node)

    visit(start, [])
    return order


@dataclass
class PrepareResult:
    order: list
    env: dict = field(default_factory=dict)
    readonly_dirs: list = field(default_factory=list)


class DepsManager:
    def __init__(self, config, store, sessions):
        self.config = config
        self.store = store
        self.sessions = sessions
        self.workspace = None  # wired by Engine after construction

    def _edges_of(self, project: str) -> list:
        return self.store.get_project(project).options.dependencies

    def declare_dependency(self, dependent: str, prerequisite: str) -> None:
        for p in (dependent, prerequisite):
            if not self.store.project_exists(p):
                raise NoSuchProject("no project named %r" % p)
        if dependent == prerequisite:
            raise CycleDetected("%s -> %s" % (dependent, prerequisite))
        options = self.store.get_project(dependent).options
        if prerequisite in options.dependencies:
            return
        options.dependencies.append(prerequisite)

        def edges(name):
            if name == dependent:
                return options.dependencies
            try:
                return self._edges_of(name)
            except NoSuchProject:
                return []

        topological_order(dependent, edges)  # raises CycleDetected
        self.store.set_options(dependent, options)

    def prepare(self, project: str, session_id: str) -> PrepareResult:
        if not self.store.project_exists(project):
            raise NoSuchProject("no project named %r" % project)
        order = topological_order(project, self._edges_of)
        ref = self.sessions.get(session_id)
        env, readonly = {}, []
        for name in order:
            opts = self.store.get_project(name).options
            if opts.external_source is not None:
                self.refresh_external(name)
            if name == project:
                continue
            # Prerequisites are kept current in their own persistent dirs.
            with self.sessions.persistent_lock(name):
                self.workspace.sync_unlocked(name, "persistent")
            if ref.kind != "persistent" and name in ref.projects:
                dep_dir = self.sessions.working_dir(name, session_id)
            else:
                dep_dir = self.sessions.persistent_dir(name)
                if ref.kind != "persistent":
                    readonly.append(dep_dir)
            env["WW_DEP_" + names.mangle_env_name(name)] = str(dep_dir.resolve())
        return PrepareResult(order=order, env=env, readonly_dirs=readonly)

    # -- external sources ----------------------------------------------------

    def refresh_external(self, project: str, force: bool = False) -> dict:
        """Bring an external project's persistent dir up to date.

        Returns {"changed": [paths]}.  No-op inside the configured TTL
        unless forced.
        """
        options = self.store.get_project(project).options
        ext = options.external_source
        if ext is None:
            raise FetchFailed("project %r has no external source" % project)
        now = time.time()
        if not force and ext.refreshed_at and \
                now - ext.refreshed_at < self.config.external_refresh_ttl:
            return {"changed": []}
        target = self.sessions.persistent_dir(project)
        before = hash_tree(target)
        if ext.kind == "archive_url":
            self._apply_archive(ext.locator, target)
        elif ext.kind == "local_dir":
            self._mirror_dir(Path(ext.locator), target)
        elif ext.kind == "command":
            self._run_command(ext.locator, target, project)
        ext.refreshed_at = now
        self.store.set_options(project, options)
        after = hash_tree(target)
        changed = sorted(rel for rel, h in after.items() if before.get(rel) != h)
        return {"changed": changed}

    def _fetch_archive(self, url: str) -> bytes:
        try:
            resp = httpx.get(url, follow_redirects=True, timeout=60.0)
            resp.raise_for_status()
            return resp.content
        except httpx.HTTPError as e:
            raise FetchFailed("fetching %s failed: %s" % (url, e))

    def _apply_archive(self, url: str, target: Path) -> None:
        data = self._fetch_archive(url)
        with tempfile.TemporaryDirectory() as tmp:
            extract_targz(data, Path(tmp), error=FetchFailed)
            for dirpath, _dirs, files in os.walk(tmp):
                for f in files:
                    src = Path(dirpath) / f
                    rel = src.relative_to(tmp)
                    dst = target / rel
                    dst.parent.mkdir(parents=True, exist_ok=True)
                    shutil.copy2(src, dst)

    def _mirror_dir(self, source: Path, target: Path) -> None:
        if not source.is_dir():
            raise FetchFailed("external directory %s does not exist" % source)
        for dirpath, _dirs, files in os.walk(source):
            for f in files:
                src = Path(dirpath) / f
                rel = src.relative_to(source)
                names.validate_rel_path(str(rel))
                dst = target / rel
                dst.parent.mkdir(parents=True, exist_ok=True)
                shutil.copy2(src, dst)

    def _run_command(self, command: str, target: Path, project: str) -> None:
        env = {"PATH": os.environ.get("PATH", "/usr/bin:/bin"),
               "HOME": str(target), "WW_PROJECT": project}
        outcome = runner.run_limited(
            ["/bin/sh", "-c", command], cwd=target, env=env,
            limits=self.config.limits,
            drop_to_user=self.config.build_user if self.config.should_drop_privileges else None,
            log_cap=self.config.log_cap_bytes,
        )
        if outcome.status in (runner.STATUS_KILLED_TIMEOUT, runner.STATUS_KILLED_LIMIT):
            raise LimitExceeded("external command exceeded limits: %s"
                                % outcome.log.decode("utf-8", "replace"))
        if outcome.status != runner.STATUS_SUCCEEDED:
            raise FetchFailed("external command failed: %s"
                              % outcome.log.decode("utf-8", "replace"))


def extract_targz(data: bytes, dest: Path, error=FetchFailed) -> list:
    """Validate and unpack a tar.gz payload; returns extracted rel paths.

    Every entry must be a plain file or directory with a valid relative
    path; anything else aborts before a single byte lands in dest.
    """
    try:
        tf = tarfile.open(fileobj=io.BytesIO(data), mode="r:gz")
    except (tarfile.TarError, OSError, EOFError) as e:
        raise error("not a valid tar.gz archive: %s" % e)
    with tf:
        members = tf.getmembers()
        for m in members:
            if m.isdir():
                continue
            if not m.isfile():
                raise error("archive entry %r is not a regular file" % m.name)
            try:
                names.validate_rel_path(m.name)
            except Exception:
                raise error("archive entry %r has an invalid path" % m.name)
        extracted = []
        for m in members:
            if m.isdir():
                continue
            out = dest / m.name
            out.parent.mkdir(parents=True, exist_ok=True)
            src = tf.extractfile(m)
            out.write_bytes(src.read())
            extracted.append(m.name)
        return extracted

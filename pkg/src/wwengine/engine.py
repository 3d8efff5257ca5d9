"""The engine facade: wires store, sessions, workspace, deps, jobs, and the
renderer together over one on-disk root, and owns cross-module operations
(project deletion, the render/preview primitive, packaging)."""

from __future__ import annotations

import os
import shutil
import stat
from pathlib import Path

from . import packages
from .config import DATA_DIR, EngineConfig
from .deps import DepsManager
from .jobs import JobManager
from .markup import RenderedPage, Renderer, default_project, parse_page, tangle
from .sessions import PERSISTENT_ID, BusyTracker, SessionManager
from .store import Store
from .util import LockRegistry
from .workspace import Workspace


class Engine:
    def __init__(self, config: EngineConfig, start_workers: bool = True):
        self.config = config
        root = Path(config.root)
        root.mkdir(parents=True, exist_ok=True)
        self._install_data(root)

        self.locks = LockRegistry()
        self.busy = BusyTracker()
        self.store = Store(root)
        self.sessions = SessionManager(root, self.store, self.locks, self.busy)
        self.workspace = Workspace(config, self.store, self.sessions,
                                   self.locks, self.busy)
        self.deps = DepsManager(config, self.store, self.sessions)
        self.deps.workspace = self.workspace
        self.workspace.deps = self.deps
        self.jobs = JobManager(config, self.store, self.sessions, self.workspace)
        self.renderer = Renderer(config, self.workspace, self.jobs)
        if start_workers:
            self.jobs.start_workers()

    def _install_data(self, root: Path) -> None:
        """Copy the bundled central makefile and helper scripts under the
        engine root, world-readable, so recipes can use them even after a
        privilege drop."""
        ww = root / "ww"
        helpers = ww / "helpers"
        helpers.mkdir(parents=True, exist_ok=True)
        shutil.copy2(DATA_DIR / "central.mk", ww / "central.mk")
        for f in (DATA_DIR / "helpers").iterdir():
            shutil.copy2(f, helpers / f.name)
        if self.config.should_drop_privileges:
            for p in (root, ww, helpers, *helpers.iterdir(), ww / "central.mk"):
                mode = stat.S_IMODE(os.stat(p).st_mode)
                os.chmod(p, mode | 0o055 if p.is_dir() else mode | 0o044)

    def close(self) -> None:
        self.jobs.stop_workers()

    # -- cross-module operations ---------------------------------------------

    def delete_project(self, name: str) -> None:
        """Remove a project and everything that hangs off it: running jobs
        are killed first, then sessions and working dirs go away."""
        self.store.get_project(name)  # raises NoSuchProject early
        self.jobs.destroy_jobs_of_project(name)
        self.sessions.destroy_sessions_of_project(name)
        self.store.delete_project(name)

    def render(self, page_name: str, text: str, session_id: str | None = None,
               mathml: bool = False, limits=None):
        """The preview primitive: parse, tangle, render inside a session.

        With no session given, an implicit preview session over the page's
        projects is created and its id returned with the result.
        """
        model = parse_page(page_name, text)
        report = tangle(model, self.store)

        touched = []
        for element in model.elements:
            try:
                project = default_project(page_name, element)
            except Exception:
                continue
            if project not in touched and self.store.project_exists(project):
                touched.append(project)

        if session_id is None:
            if touched:
                session_id = self.sessions.create(touched, kind="preview").id
            else:
                session_id = PERSISTENT_ID

        rendered = self.renderer.render_page(model, session_id,
                                             limits=limits, mathml=mathml)
        rendered.diagnostics.extend(report.diagnostics)
        return rendered, session_id

    def export_project(self, name: str, with_products: bool = False) -> bytes:
        return packages.export_package(self, name, with_products=with_products)

    def import_project(self, data: bytes, merge: bool = False) -> str:
        return packages.import_package(self, data, merge=merge)

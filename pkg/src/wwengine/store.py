"""Authoritative project/source-file storage, persisted on disk.

Layout under ``<root>/projects/<name>/``:

    manifest.json      project metadata + per-source hashes
    sources/<path>     raw content bytes, one file per source
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

from . import names
from .errors import DuplicateProject, NoSuchProject
from .util import (LockRegistry, RWLock, atomic_write_bytes,
                   atomic_write_json, sha256_bytes)


@dataclass
class ExternalSource:
    kind: str  # archive_url | local_dir | command
    locator: str
    refreshed_at: float | None = None

    def __post_init__(self):
        if self.kind not in ("archive_url", "local_dir", "command"):
            raise ValueError("unknown external source kind %r" % self.kind)
        if not self.locator:
            raise ValueError("external source locator is empty")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "locator": self.locator,
                "refreshed_at": self.refreshed_at}

    @classmethod
    def from_dict(cls, d):
        return cls(**d) if d else None


@dataclass
class ProjectOptions:
    external_source: ExternalSource | None = None
    detached_subdirs: list = field(default_factory=list)
    dependencies: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "external_source": self.external_source.to_dict() if self.external_source else None,
            "detached_subdirs": list(self.detached_subdirs),
            "dependencies": list(self.dependencies),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectOptions":
        d = d or {}
        return cls(
            external_source=ExternalSource.from_dict(d.get("external_source")),
            detached_subdirs=list(d.get("detached_subdirs", [])),
            dependencies=list(d.get("dependencies", [])),
        )

    def validate(self, project_name: str) -> "ProjectOptions":
        for p in self.detached_subdirs:
            names.validate_rel_path(p)
        seen = set()
        for dep in self.dependencies:
            names.validate_project_name(dep)
            if dep == project_name or dep in seen:
                raise ValueError("bad dependency list: %r" % self.dependencies)
            seen.add(dep)
        return self


@dataclass
class SourceFile:
    filename: str
    content: bytes
    attributes: dict = field(default_factory=dict)
    origin: tuple | None = None  # (page_name, revision_id)
    updated_at: float = 0.0


@dataclass
class Project:
    name: str
    options: ProjectOptions
    revision: int = 0
    created_at: float = 0.0
    # filename -> metadata dict (content loaded on demand)
    sources: dict = field(default_factory=dict)


class Store:
    """Disk-backed project store.  Per-project RW lock: mutations exclusive,
    reads shared."""

    def __init__(self, root: Path):
        self.root = Path(root) / "projects"
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks = LockRegistry(factory=RWLock)

    # -- paths ------------------------------------------------------------

    def _project_dir(self, name: str) -> Path:
        return self.root / name

    def _manifest_path(self, name: str) -> Path:
        return self._project_dir(name) / "manifest.json"

    def _source_path(self, name: str, rel: str) -> Path:
        return self._project_dir(name) / "sources" / rel

    def _lock(self, name: str) -> RWLock:
        return self._locks.get(name)

    # -- manifest I/O -----------------------------------------------------

    def _load_manifest(self, name: str) -> dict:
        path = self._manifest_path(name)
        if not path.exists():
            raise NoSuchProject("no project named %r" % name)
        import json
        return json.loads(path.read_text())

    def _save_manifest(self, name: str, manifest: dict) -> None:
        atomic_write_json(self._manifest_path(name), manifest)

    def _manifest_to_project(self, m: dict) -> Project:
        return Project(
            name=m["name"],
            options=ProjectOptions.from_dict(m.get("options")),
            revision=m.get("revision", 0),
            created_at=m.get("created_at", 0.0),
            sources=dict(m.get("sources", {})),
        )

    # -- operations --------------------------------------------------------

    def create_project(self, name: str, options: ProjectOptions | None = None) -> Project:
        name = names.validate_project_name(name)
        options = (options or ProjectOptions()).validate(name)
        with self._lock(name).write():
            if self._manifest_path(name).exists():
                raise DuplicateProject("project %r already exists" % name)
            pdir = self._project_dir(name)
            (pdir / "sources").mkdir(parents=True, exist_ok=True)
            manifest = {
                "name": name,
                "revision": 0,
                "created_at": time.time(),
                "options": options.to_dict(),
                "sources": {},
            }
            self._save_manifest(name, manifest)
            return self._manifest_to_project(manifest)

    def project_exists(self, name: str) -> bool:
        return self._manifest_path(name).exists()

    def get_project(self, name: str) -> Project:
        with self._lock(name).read():
            return self._manifest_to_project(self._load_manifest(name))

    def list_projects(self) -> list:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir()
                      if (p / "manifest.json").exists())

    def delete_project(self, name: str) -> None:
        import shutil
        with self._lock(name).write():
            if not self._manifest_path(name).exists():
                raise NoSuchProject("no project named %r" % name)
            shutil.rmtree(self._project_dir(name))

    def set_options(self, name: str, options: ProjectOptions) -> None:
        options.validate(name)
        with self._lock(name).write():
            m = self._load_manifest(name)
            m["options"] = options.to_dict()
            m["revision"] += 1
            self._save_manifest(name, m)

    def put_source_file(self, project: str, file: SourceFile) -> int:
        rel = names.validate_rel_path(file.filename)
        with self._lock(project).write():
            m = self._load_manifest(project)
            dest = self._source_path(project, rel)
            dest.parent.mkdir(parents=True, exist_ok=True)
            atomic_write_bytes(dest, file.content)
            m["sources"][rel] = {
                "sha256": sha256_bytes(file.content),
                "attributes": dict(file.attributes),
                "origin": list(file.origin) if file.origin else None,
                "updated_at": file.updated_at or time.time(),
            }
            m["revision"] += 1
            self._save_manifest(project, m)
            return m["revision"]

    def remove_source_file(self, project: str, filename: str) -> bool:
        rel = names.validate_rel_path(filename)
        with self._lock(project).write():
            m = self._load_manifest(project)
            if rel not in m["sources"]:
                return False
            del m["sources"][rel]
            path = self._source_path(project, rel)
            if path.exists():
                path.unlink()
            m["revision"] += 1
            self._save_manifest(project, m)
            return True

    def get_source_file(self, project: str, filename: str) -> SourceFile:
        rel = names.validate_rel_path(filename)
        with self._lock(project).read():
            m = self._load_manifest(project)
            if rel not in m["sources"]:
                from .errors import FileNotFound
                raise FileNotFound("no source %r in project %r" % (rel, project))
            meta = m["sources"][rel]
            return SourceFile(
                filename=rel,
                content=self._source_path(project, rel).read_bytes(),
                attributes=dict(meta.get("attributes", {})),
                origin=tuple(meta["origin"]) if meta.get("origin") else None,
                updated_at=meta.get("updated_at", 0.0),
            )

    def list_sources(self, project: str) -> dict:
        """filename -> metadata dict (no content)."""
        with self._lock(project).read():
            return dict(self._load_manifest(project).get("sources", {}))

    def sources_from_page(self, page_name: str) -> list:
        """All (project, filename) pairs whose origin page is page_name."""
        out = []
        for name in self.list_projects():
            for rel, meta in self.list_sources(name).items():
                origin = meta.get("origin")
                if origin and origin[0] == page_name:
                    out.append((name, rel))
        return out

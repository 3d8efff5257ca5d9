"""Project packaging: tar.gz export for offline work, and re-import.

Archive layout (bit-exact contract, shared by the API and the CLI):

    <source files at the archive root, original relative paths>
    WW/central.mk      the service's central makefile
    WW/project.json    {"name", "options", "sources": {path: {sha256,
                        attributes, origin}}}

Products are excluded unless explicitly requested; the source-only package
is the journal-submission default.
"""

from __future__ import annotations

import io
import json
import tarfile
import time

from . import names
from .deps import extract_targz
from .errors import BadArchive, DuplicateProject
from .sessions import INTERNAL_FILES, PERSISTENT_ID
from .store import ProjectOptions, SourceFile
from .util import walk_rel_files

MANIFEST_MEMBER = "WW/project.json"
MAKEFILE_MEMBER = "WW/central.mk"


def export_package(engine, project: str, with_products: bool = False) -> bytes:
    proj = engine.store.get_project(project)
    sources = engine.store.list_sources(project)

    manifest = {
        "name": proj.name,
        "options": proj.options.to_dict(),
        "sources": {
            rel: {"sha256": meta["sha256"],
                  "attributes": meta.get("attributes", {}),
                  "origin": meta.get("origin")}
            for rel, meta in sources.items()
        },
    }

    buf = io.BytesIO()
    now = int(time.time())

    def add_bytes(tf, name, data):
        info = tarfile.TarInfo(name=name)
        info.size = len(data)
        info.mtime = now
        info.mode = 0o644
        tf.addfile(info, io.BytesIO(data))

    with tarfile.open(fileobj=buf, mode="w:gz") as tf:
        for rel in sorted(sources):
            content = engine.store.get_source_file(project, rel).content
            add_bytes(tf, rel, content)
        if with_products:
            workdir = engine.sessions.persistent_dir(project)
            for rel in walk_rel_files(workdir, exclude=INTERNAL_FILES):
                if rel not in sources:
                    add_bytes(tf, rel, (workdir / rel).read_bytes())
        add_bytes(tf, MAKEFILE_MEMBER,
                  engine.workspace.central_makefile.read_bytes())
        add_bytes(tf, MANIFEST_MEMBER,
                  json.dumps(manifest, indent=2, sort_keys=True).encode())
    return buf.getvalue()


def import_package(engine, data: bytes, merge: bool = False) -> str:
    """Create (or, with merge, update) a project from an exported archive.

    Everything is validated before a single byte reaches the store, so a
    bad archive never leaves a half-imported project behind.
    """
    try:
        tf = tarfile.open(fileobj=io.BytesIO(data), mode="r:gz")
    except (tarfile.TarError, OSError, EOFError) as e:
        raise BadArchive("not a valid tar.gz archive: %s" % e)
    with tf:
        members = {m.name: m for m in tf.getmembers() if m.isfile()}
        for m in tf.getmembers():
            if m.isdir():
                continue
            if not m.isfile():
                raise BadArchive("archive entry %r is not a regular file" % m.name)
            try:
                names.validate_rel_path(m.name)
            except Exception:
                raise BadArchive("archive entry %r has an invalid path" % m.name)
        if MANIFEST_MEMBER not in members:
            raise BadArchive("archive is missing %s" % MANIFEST_MEMBER)
        try:
            manifest = json.loads(tf.extractfile(members[MANIFEST_MEMBER]).read())
            name = manifest["name"]
            options = ProjectOptions.from_dict(manifest.get("options"))
            source_meta = manifest.get("sources", {})
        except (ValueError, KeyError, TypeError) as e:
            raise BadArchive("bad %s: %s" % (MANIFEST_MEMBER, e))
        names.validate_project_name(name)
        contents = {}
        for rel in source_meta:
            names.validate_rel_path(rel)
            if rel not in members:
                raise BadArchive("archive lacks listed source %r" % rel)
            contents[rel] = tf.extractfile(members[rel]).read()

    exists = engine.store.project_exists(name)
    if exists and not merge:
        raise DuplicateProject("project %r already exists; use merge" % name)
    if not exists:
        engine.store.create_project(name, options)
    else:
        engine.store.set_options(name, options)
    for rel, content in contents.items():
        meta = source_meta[rel]
        origin = meta.get("origin")
        engine.store.put_source_file(name, SourceFile(
            filename=rel, content=content,
            attributes=dict(meta.get("attributes", {})),
            origin=tuple(origin) if origin else None))
    return name


__all__ = ["export_package", "import_package", "MANIFEST_MEMBER",
           "MAKEFILE_MEMBER", "extract_targz", "PERSISTENT_ID"]

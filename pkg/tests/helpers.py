"""Shared test helpers."""

import os
import shutil
import tempfile

from wwengine.config import EngineConfig, ResourceLimits
from wwengine.engine import Engine
from wwengine.store import SourceFile

# Generous enough for desk-scale builds, tight enough that nothing hangs.
FAST_LIMITS = dict(niceness=5, cpu_seconds=30, wall_seconds=30,
                   max_processes=64,
                   max_output_bytes_per_file=10 * 1024 * 1024,
                   max_dir_bytes=50 * 1024 * 1024)


def make_root() -> str:
    # World-traversable so privilege-dropped recipes can reach their workdirs
    # (pytest's tmp_path lives under a 0700 directory).
    root = tempfile.mkdtemp(prefix="ww-test-")
    os.chmod(root, 0o755)
    return root


def make_engine(root=None, drop_privileges=False, **overrides) -> Engine:
    cfg = EngineConfig(root=root or make_root(),
                       drop_privileges=drop_privileges,
                       limits=ResourceLimits(**FAST_LIMITS),
                       **overrides)
    return Engine(cfg)


def destroy_engine(engine: Engine):
    engine.close()
    shutil.rmtree(engine.config.root, ignore_errors=True)


def put(engine, project, filename, content, attributes=None, origin=None):
    if not engine.store.project_exists(project):
        engine.store.create_project(project)
    if isinstance(content, str):
        content = content.encode()
    return engine.store.put_source_file(project, SourceFile(
        filename=filename, content=content,
        attributes=attributes or {}, origin=origin))


# A project-level makefile exercising a simple user-defined rule:
# reversed lines, built with python so it is platform-deterministic.
REVERSE_MAKEFILE = (
    "%.out: %.txt\n"
    "\tpython3 -c 'import sys; "
    "open(sys.argv[2], \"w\").writelines(reversed(open(sys.argv[1]).readlines()))' "
    "$< $@\n"
)

FIG1_PAGE = """==R graphics example==

Here is a simple example of how to do a figure with R.
The custom rules make it simple: just define a .R file:

<source-file filename=example.R>
plot(function(x){-x*cos(x-1)}, -pi, pi, col="blue");
</source-file>

and request its output using just the right filename:

<project-file filename=example.Rout.png/>
"""

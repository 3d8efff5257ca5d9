"""Small shared helpers: hashing, atomic writes, a readers-writer lock."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_json(path: Path, data) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True))
    os.replace(tmp, path)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def dir_size_bytes(root: Path) -> int:
    total = 0
    for dirpath, _dirnames, filenames in os.walk(root):
        for name in filenames:
            p = os.path.join(dirpath, name)
            try:
                if not os.path.islink(p):
                    total += os.path.getsize(p)
            except OSError:
                pass
    return total


def walk_rel_files(root: Path, exclude=()) -> list:
    """Relative paths of all regular files under root, sorted.

    Symlinked directories are not descended into (detached subdirs are
    exposed as symlinks and must not be treated as session content).
    """
    out = []
    root = Path(root)
    for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
        dirnames[:] = [d for d in dirnames
                       if not os.path.islink(os.path.join(dirpath, d))]
        for name in filenames:
            full = os.path.join(dirpath, name)
            rel = os.path.relpath(full, root).replace(os.sep, "/")
            if rel in exclude or os.path.islink(full):
                continue
            out.append(rel)
    return sorted(out)


def hash_tree(root: Path, exclude=()) -> dict:
    """Map of relative path -> sha256 for regular files under root."""
    return {rel: sha256_file(Path(root) / rel)
            for rel in walk_rel_files(root, exclude=exclude)}


class RWLock:
    """Readers-writer lock; writers exclusive, readers shared.

    Write acquisition is reentrant-unsafe by design: keep critical sections
    small and never nest write inside read.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    def acquire_read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1

    def release_read(self):
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True

    def release_write(self):
        with self._cond:
            self._writer = False
            self._cond.notify_all()

    class _Guard:
        def __init__(self, acquire, release):
            self._acquire = acquire
            self._release = release

        def __enter__(self):
            self._acquire()

        def __exit__(self, *exc):
            self._release()

    def read(self):
        return self._Guard(self.acquire_read, self.release_read)

    def write(self):
        return self._Guard(self.acquire_write, self.release_write)


class LockRegistry:
    """Named lock factory; one lock object per key, created on demand."""

    def __init__(self, factory=threading.RLock):
        self._factory = factory
        self._locks = {}
        self._mutex = threading.Lock()

    def get(self, key):
        with self._mutex:
            if key not in self._locks:
                self._locks[key] = self._factory()
            return self._locks[key]

"""Validation of project names and relative paths, plus the name mangling
used for dependency environment variables and page-name sanitization."""

from __future__ import annotations

import posixpath
import re

from .errors import InvalidName, InvalidPath

PROJECT_NAME_RE = re.compile(r"^[A-Za-z0-9._ -]+$")
MAX_NAME_LEN = 255
MAX_PATH_LEN = 1024


def validate_project_name(name: str) -> str:
    """Return the trimmed name, raising InvalidName if it breaks the rules."""
    if not isinstance(name, str):
        raise InvalidName("project name must be a string")
    name = name.strip()
    if not name:
        raise InvalidName("project name is empty")
    if len(name) > MAX_NAME_LEN:
        raise InvalidName("project name longer than %d characters" % MAX_NAME_LEN)
    if name.startswith("."):
        raise InvalidName("project name may not start with '.'")
    if not PROJECT_NAME_RE.match(name):
        raise InvalidName("project name %r contains forbidden characters" % name)
    return name


def validate_rel_path(path: str) -> str:
    """Return a normalized relative path, raising InvalidPath on violations."""
    if not isinstance(path, str) or not path:
        raise InvalidPath("path is empty")
    if "\x00" in path:
        raise InvalidPath("path contains NUL byte")
    if len(path) > MAX_PATH_LEN:
        raise InvalidPath("path longer than %d characters" % MAX_PATH_LEN)
    if path.startswith("/") or path.startswith("\\"):
        raise InvalidPath("path %r is absolute" % path)
    # Windows-style drive prefixes are never valid here.
    if re.match(r"^[A-Za-z]:", path):
        raise InvalidPath("path %r is absolute" % path)
    parts = path.split("/")
    for part in parts:
        if part in ("", ".", ".."):
            raise InvalidPath("path %r has a forbidden component %r" % (path, part))
    return posixpath.join(*parts)


def is_valid_rel_path(path: str) -> bool:
    try:
        validate_rel_path(path)
        return True
    except InvalidPath:
        return False


def sanitize_project_name(page_name: str) -> str:
    """Derive a valid project name from a wiki page name.

    Forbidden characters (notably '/') become spaces; leading dots are
    stripped.  Raises InvalidName when nothing valid remains.
    """
    cleaned = "".join(c if PROJECT_NAME_RE.match(c) else " " for c in page_name)
    cleaned = cleaned.strip().lstrip(".").strip()
    if not cleaned:
        raise InvalidName("page name %r yields no valid project name" % page_name)
    return validate_project_name(cleaned[:MAX_NAME_LEN])


def mangle_env_name(project_name: str) -> str:
    """Project name -> suffix of its WW_DEP_* environment variable."""
    return re.sub(r"[^A-Za-z0-9]", "_", project_name).upper()

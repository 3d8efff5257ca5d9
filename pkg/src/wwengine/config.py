"""Service configuration: store root, central makefile, limits, display rules.

A config file (JSON) may override any field; see docs/api.md for the schema.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EngineError

DATA_DIR = Path(__file__).resolve().parent / "data"

# Built-in extension -> media type table; config may override or extend.
MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".gif": "image/gif",
    ".svg": "image/svg+xml",
    ".pdf": "application/pdf",
    ".html": "text/html",
    ".xhtml": "application/xhtml+xml",
    ".txt": "text/plain",
    ".csv": "text/csv",
    ".tsv": "text/tab-separated-values",
    ".json": "application/json",
    ".tex": "text/x-tex",
    ".md": "text/markdown",
    ".r": "text/plain",
    ".rout": "text/plain",
    ".py": "text/plain",
    ".sh": "text/plain",
    ".mk": "text/plain",
    ".css": "text/css",
    ".js": "text/javascript",
    ".xml": "application/xml",
}

DEFAULT_MEDIA_TYPE = "application/octet-stream"


@dataclass
class ResourceLimits:
    """Bounds applied to every make (and external-command) subprocess."""

    niceness: int = 10
    cpu_seconds: int = 60
    wall_seconds: int = 120
    max_processes: int = 32
    max_output_bytes_per_file: int = 64 * 1024 * 1024
    max_dir_bytes: int = 512 * 1024 * 1024

    def validate(self) -> "ResourceLimits":
        if not (0 <= self.niceness <= 19):
            raise EngineError("niceness must be within 0-19")
        for name in ("cpu_seconds", "wall_seconds", "max_processes",
                     "max_output_bytes_per_file", "max_dir_bytes"):
            if getattr(self, name) <= 0:
                raise EngineError("%s must be positive" % name)
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ResourceLimits":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__}).validate()


@dataclass
class DisplayRule:
    """Maps a source filename suffix to the derived file displayed inline."""

    match_suffix: str
    display_target_suffix: str
    link_targets: list = field(default_factory=list)  # [(label, target_suffix)]
    inline_mode: str = "preformatted"  # image|preformatted|html_fragment|download_link

    def __post_init__(self):
        if not self.match_suffix.startswith("."):
            raise EngineError("match_suffix must start with '.'")
        if not self.display_target_suffix.startswith("."):
            raise EngineError("display_target_suffix must start with '.'")


def default_display_rules() -> list:
    # .tex.html stands in for a LaTeX-to-HTML pipeline target; the bundled
    # central makefile carries a fallback rule so no TeX toolchain is needed.
    return [
        DisplayRule(".tex", ".tex.html",
                    link_targets=[("pdf", ".tex.pdf")],
                    inline_mode="html_fragment"),
    ]


@dataclass
class EngineConfig:
    root: Path
    central_makefile: Path | None = None  # default: bundled central.mk
    make_executable: str = "make"
    token: str = ""
    bind_host: str = "127.0.0.1"
    bind_port: int = 8777
    limits: ResourceLimits = field(default_factory=ResourceLimits)
    max_queue: int = 16
    max_concurrent_jobs: int = 2
    external_refresh_ttl: float = 300.0
    media_type_overrides: dict = field(default_factory=dict)
    display_rules: list = field(default_factory=default_display_rules)
    log_cap_bytes: int = 1024 * 1024
    # Extra variables handed to every recipe (deployment hooks, test probes).
    extra_env: dict = field(default_factory=dict)
    # Run make recipes as an unprivileged user when the engine itself runs
    # as root; needed for read-only exposure to mean anything.  "auto" drops
    # to `nobody` iff euid == 0.
    drop_privileges: str | bool = "auto"
    build_user: str = "nobody"

    def __post_init__(self):
        self.root = Path(self.root)
        if self.central_makefile is not None:
            self.central_makefile = Path(self.central_makefile)
        if isinstance(self.limits, dict):
            self.limits = ResourceLimits.from_dict(self.limits)
        self.limits.validate()
        rules = []
        for r in self.display_rules:
            if isinstance(r, dict):
                r = DisplayRule(
                    match_suffix=r["match_suffix"],
                    display_target_suffix=r["display_target_suffix"],
                    link_targets=[tuple(t) for t in r.get("link_targets", [])],
                    inline_mode=r.get("inline_mode", "preformatted"),
                )
            rules.append(r)
        self.display_rules = rules

    @property
    def should_drop_privileges(self) -> bool:
        if self.drop_privileges == "auto":
            return hasattr(os, "geteuid") and os.geteuid() == 0
        return bool(self.drop_privileges)

    def media_type_for(self, path: str) -> str:
        suffix = Path(path).suffix.lower()
        if suffix in self.media_type_overrides:
            return self.media_type_overrides[suffix]
        return MEDIA_TYPES.get(suffix, DEFAULT_MEDIA_TYPE)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "EngineConfig":
        data = json.loads(Path(path).read_text())
        data.update(overrides)
        if "root" not in data:
            raise EngineError("config file must set 'root'")
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

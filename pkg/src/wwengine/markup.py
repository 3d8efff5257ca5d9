"""Page markup: source-file / project-file elements, tangling, rendering.

The parser is lossless: concatenating the raw text of the returned segments
reproduces the input byte for byte.  Malformed elements degrade to plain
text segments and leave a diagnostic behind instead of aborting.
"""

from __future__ import annotations

import html as html_mod
import re
import urllib.parse
from dataclasses import dataclass, field

from . import names
from .config import DisplayRule
from .errors import EngineError, InvalidPath, MakeFailed
from .store import SourceFile

TAG_OPEN_RE = re.compile(r"<(source-file|project-file)(?=[\s/>])")
ATTR_RE = re.compile(
    r'\s+([A-Za-z_][A-Za-z0-9_.:-]*)\s*=\s*("[^"]*"|[^\s>"]+?(?=\s|/>|>))')
TAG_END_RE = re.compile(r"\s*(/?)>")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".gif", ".svg")


@dataclass
class Segment:
    kind: str  # text | source_element | project_file_element
    raw: str
    attributes: dict | None = None
    body: str | None = None


@dataclass
class PageModel:
    page_name: str
    segments: list
    diagnostics: list = field(default_factory=list)

    @property
    def elements(self):
        return [s for s in self.segments if s.kind != "text"]


def parse_page(page_name: str, text: str) -> PageModel:
    segments, diagnostics = [], []
    pos = 0

    def emit_text(upto):
        nonlocal pos
        if upto > pos:
            segments.append(Segment(kind="text", raw=text[pos:upto]))
        pos = upto

    while True:
        m = TAG_OPEN_RE.search(text, pos)
        if m is None:
            emit_text(len(text))
            break
        emit_text(m.start())
        segment, end, diag = _parse_element(text, m)
        if diag:
            diagnostics.append(diag)
        if segment is None:
            # Malformed: the offending stretch stays in the page as text.
            segments.append(Segment(kind="text", raw=text[pos:end]))
        else:
            segments.append(segment)
        pos = end

    model = PageModel(page_name=page_name, segments=segments,
                      diagnostics=diagnostics)
    assert "".join(s.raw for s in model.segments) == text
    return model


def _parse_element(text, open_match):
    """Returns (segment | None, next_pos, diagnostic | None)."""
    tag = open_match.group(1)
    cursor = open_match.end()
    attributes = {}
    while True:
        am = ATTR_RE.match(text, cursor)
        if am is None:
            break
        key, value = am.group(1), am.group(2)
        if value.startswith('"'):
            value = value[1:-1]
        if key in attributes:
            return None, am.end(), _diag("DuplicateAttribute", open_match.start(),
                                         "attribute %r repeated in <%s>" % (key, tag))
        attributes[key] = value
        cursor = am.end()
    em = TAG_END_RE.match(text, cursor)
    if em is None:
        return None, cursor, _diag("BadAttributeSyntax", open_match.start(),
                                   "cannot parse attributes of <%s>" % tag)
    self_closing = em.group(1) == "/"
    tag_close = em.end()

    if "filename" not in attributes:
        return None, tag_close, _diag("MissingFilename", open_match.start(),
                                      "<%s> has no filename attribute" % tag)
    try:
        names.validate_rel_path(attributes["filename"])
    except InvalidPath as e:
        return None, tag_close, _diag("InvalidFilename", open_match.start(), str(e))

    if tag == "project-file":
        if not self_closing:
            return None, tag_close, _diag(
                "UnclosedElement", open_match.start(),
                "<project-file> must be self-closing")
        return (Segment(kind="project_file_element",
                        raw=text[open_match.start():tag_close],
                        attributes=attributes),
                tag_close, None)

    # source-file
    if self_closing:
        return (Segment(kind="source_element",
                        raw=text[open_match.start():tag_close],
                        attributes=attributes, body=""),
                tag_close, None)
    closer = text.find("</source-file>", tag_close)
    if closer == -1:
        return None, tag_close, _diag("UnclosedElement", open_match.start(),
                                      "<source-file> never closed")
    end = closer + len("</source-file>")
    return (Segment(kind="source_element",
                    raw=text[open_match.start():end],
                    attributes=attributes, body=text[tag_close:closer]),
            end, None)


def _diag(code, offset, message):
    return {"code": code, "offset": offset, "message": message}


def default_project(page_name: str, element: Segment) -> str:
    if element.attributes and element.attributes.get("project"):
        return names.validate_project_name(element.attributes["project"])
    return names.sanitize_project_name(page_name)


def element_body_bytes(element: Segment) -> bytes:
    """File content of a source element: one newline straight after the
    opening tag is formatting, not content; a trailing newline is kept."""
    body = element.body or ""
    if body.startswith("\n"):
        body = body[1:]
    return body.encode("utf-8")


@dataclass
class TangleReport:
    written: list  # (project, filename, revision)
    removed: list  # (project, filename)
    diagnostics: list = field(default_factory=list)

    def to_dict(self):
        return {"written": [list(w) for w in self.written],
                "removed": [list(r) for r in self.removed],
                "diagnostics": self.diagnostics}


def tangle(model: PageModel, store, revision_id=None) -> TangleReport:
    """Write every source element into the store; drop sources previously
    tangled from this page that the page no longer defines."""
    written, removed, diagnostics = [], [], []
    seen = {}
    for element in model.segments:
        if element.kind != "source_element":
            continue
        try:
            project = default_project(model.page_name, element)
            filename = names.validate_rel_path(element.attributes["filename"])
        except EngineError as e:
            diagnostics.append(_diag(e.code, 0, e.message))
            continue
        if (project, filename) in seen:
            diagnostics.append(_diag(
                "DuplicateSource", 0,
                "%s:%s defined more than once; last definition wins"
                % (project, filename)))
        seen[(project, filename)] = element

    for (project, filename), element in seen.items():
        if not store.project_exists(project):
            store.create_project(project)
        try:
            rev = store.put_source_file(project, SourceFile(
                filename=filename,
                content=element_body_bytes(element),
                attributes={k: v for k, v in element.attributes.items()
                            if k not in ("filename", "project")},
                origin=(model.page_name, revision_id),
            ))
            written.append((project, filename, rev))
        except EngineError as e:
            diagnostics.append(_diag(e.code, 0, e.message))

    for project, filename in store.sources_from_page(model.page_name):
        if (project, filename) not in seen:
            store.remove_source_file(project, filename)
            removed.append((project, filename))
    return TangleReport(written=written, removed=removed,
                        diagnostics=diagnostics)


@dataclass
class DisplayPlan:
    inline: tuple | None  # (target_path, mode) or None
    links: list  # [(label, target_path)]
    raw_source: bool = False


def mode_for_target(path: str) -> str:
    lower = path.lower()
    if lower.endswith(IMAGE_SUFFIXES):
        return "image"
    if lower.endswith((".html", ".xhtml")):
        return "html_fragment"
    if lower.endswith(".pdf"):
        return "download_link"
    return "preformatted"


def resolve_display(filename: str, attributes: dict, rules: list,
                    mathml: bool = False) -> DisplayPlan:
    """Pure mapping from (filename, attributes, rules, mathml) to what gets
    shown inline and which auxiliary links appear."""
    display = (attributes or {}).get("display")
    if display == "none":
        return DisplayPlan(inline=None, links=[], raw_source=True)
    if display:
        plan = DisplayPlan(inline=(display, mode_for_target(display)), links=[])
    else:
        plan = None
        for rule in rules:
            if filename.endswith(rule.match_suffix):
                stem = filename[: -len(rule.match_suffix)]
                plan = DisplayPlan(
                    inline=(stem + rule.display_target_suffix, rule.inline_mode),
                    links=[(label, stem + suffix)
                           for label, suffix in rule.link_targets])
                break
        if plan is None:
            return DisplayPlan(inline=None, links=[], raw_source=True)
    if mathml and plan.inline:
        target, mode = plan.inline
        if mode == "html_fragment" and target.endswith(".html"):
            plan = DisplayPlan(inline=(target[: -len(".html")] + ".xhtml", mode),
                               links=plan.links)
    return plan


@dataclass
class RenderedPage:
    html: str
    diagnostics: list
    jobs: list  # Job dicts for the banner

    def to_dict(self):
        return {"html": self.html, "diagnostics": self.diagnostics,
                "jobs": self.jobs}


def file_url(project: str, path: str, session_id: str) -> str:
    return "/projects/%s/files/%s?session=%s" % (
        urllib.parse.quote(project, safe=""),
        urllib.parse.quote(path), urllib.parse.quote(session_id, safe=""))


class Renderer:
    """Turns a parsed page into HTML, building referenced files on demand.

    Text segments get deliberately minimal treatment (paragraph breaks
    only); this is not a wiki-markup engine.  html_fragment targets are
    embedded unsanitized -- acceptable only because editing is restricted
    to trusted users; see README.
    """

    def __init__(self, config, workspace, jobs):
        self.config = config
        self.workspace = workspace
        self.jobs = jobs

    def render_page(self, model: PageModel, session_id: str,
                    limits=None, mathml: bool = False) -> RenderedPage:
        parts = []
        diagnostics = list(model.diagnostics)
        projects_touched = []

        for segment in model.segments:
            if segment.kind == "text":
                parts.append(self._render_text(segment.raw))
                continue
            try:
                project = default_project(model.page_name, segment)
            except EngineError as e:
                diagnostics.append(_diag(e.code, 0, e.message))
                parts.append(self._error_box(e.message))
                continue
            if project not in projects_touched:
                projects_touched.append(project)
            filename = segment.attributes["filename"]
            if segment.kind == "source_element":
                parts.append(self._render_source(project, filename, segment,
                                                 session_id, limits, mathml,
                                                 diagnostics))
            else:
                parts.append(self._render_file(project, filename,
                                               mode_for_target(filename),
                                               session_id, limits))

        banner = []
        for project in projects_touched:
            banner.extend(j.to_dict() for j in self.jobs.list_jobs(project))
        return RenderedPage(html="".join(parts), diagnostics=diagnostics,
                            jobs=banner)

    # -- pieces -----------------------------------------------------------

    def _render_text(self, raw: str) -> str:
        paragraphs = [p for p in re.split(r"\n\s*\n", raw) if p.strip()]
        return "".join("<p>%s</p>\n" % html_mod.escape(p.strip())
                       for p in paragraphs)

    def _render_source(self, project, filename, segment, session_id,
                       limits, mathml, diagnostics) -> str:
        plan = resolve_display(filename, segment.attributes,
                               self.config.display_rules, mathml=mathml)
        out = []
        if plan.inline is None:
            out.append('<pre class="ww-source">%s</pre>\n'
                       % html_mod.escape(
                           element_body_bytes(segment).decode("utf-8", "replace")))
        else:
            target, mode = plan.inline
            out.append(self._render_file(project, target, mode,
                                         session_id, limits))
        for label, target in plan.links:
            href = file_url(project, target, session_id) + "&make=1"
            out.append('<a class="ww-link" href="%s">%s</a>\n'
                       % (html_mod.escape(href, quote=True),
                          html_mod.escape(label)))
        return "".join(out)

    def _render_file(self, project, path, mode, session_id, limits) -> str:
        try:
            view = self.workspace.get_file(project, session_id, path,
                                           make_first=True, limits=limits)
        except MakeFailed as e:
            log = e.result.log.decode("utf-8", "replace") if e.result else ""
            return self._error_box("make %s failed\n%s" % (path, log))
        except EngineError as e:
            return self._error_box("%s: %s" % (e.code, e.message))
        if mode == "image" or view.media_type.startswith("image/"):
            return '<img class="ww-file" src="%s" alt="%s"/>\n' % (
                html_mod.escape(file_url(project, path, session_id), quote=True),
                html_mod.escape(path))
        if mode == "html_fragment" or view.media_type in (
                "text/html", "application/xhtml+xml"):
            # Unsanitized by design; trusted-editor model.
            return '<div class="ww-html">%s</div>\n' % view.bytes.decode(
                "utf-8", "replace")
        if mode == "download_link" or not view.media_type.startswith("text/"):
            return '<a class="ww-file" href="%s">%s</a>\n' % (
                html_mod.escape(file_url(project, path, session_id), quote=True),
                html_mod.escape(path))
        return '<pre class="ww-file">%s</pre>\n' % html_mod.escape(
            view.bytes.decode("utf-8", "replace"))

    def _error_box(self, message: str) -> str:
        return '<div class="ww-error"><pre>%s</pre></div>\n' % html_mod.escape(message)

"""HTTP facade over the engine; a thin layer mapping routes to module calls.

Mutating requests (POST/PUT/DELETE) require the shared-secret bearer token.
Every engine error maps to exactly one (code, HTTP status) pair.
"""

from __future__ import annotations

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import __version__
from .config import EngineConfig, ResourceLimits
from .engine import Engine
from .errors import EngineError, Unauthorized
from .sessions import PERSISTENT_ID
from .store import ExternalSource, ProjectOptions, SourceFile

ATTR_HEADER_PREFIX = "x-ww-attr-"
MUTATING_METHODS = ("POST", "PUT", "DELETE", "PATCH")


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="project engine", version=__version__)
    token = engine.config.token

    @app.middleware("http")
    async def auth_middleware(request: Request, call_next):
        if token and request.method in MUTATING_METHODS:
            supplied = request.headers.get("authorization", "")
            if supplied != "Bearer " + token:
                err = Unauthorized("missing or wrong bearer token")
                return JSONResponse(status_code=err.http_status,
                                    content=err.to_dict())
        return await call_next(request)

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, exc: EngineError):
        body = exc.to_dict()
        result = getattr(exc, "result", None)
        if result is not None:
            body["result"] = result.to_dict()
        return JSONResponse(status_code=exc.http_status, content=body)

    # -- meta ---------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    # -- projects -------------------------------------------------------------

    @app.get("/projects")
    def list_projects():
        return engine.store.list_projects()

    @app.post("/projects", status_code=201)
    async def create_project(request: Request):
        body = await request.json()
        options = _options_from_json(body.get("options"))
        project = engine.store.create_project(body["name"], options)
        return _project_dict(project)

    # Import must be declared before the parameterized /projects/{p} routes
    # would never shadow a POST, but keep it adjacent for readability.
    @app.post("/projects/import")
    async def import_project(request: Request, merge: int = 0):
        data = await request.body()
        name = engine.import_project(data, merge=bool(merge))
        return {"name": name}

    @app.get("/projects/{p}")
    def get_project(p: str):
        return _project_dict(engine.store.get_project(p),
                             sources=engine.store.list_sources(p))

    @app.delete("/projects/{p}")
    def delete_project(p: str):
        engine.delete_project(p)
        return {"deleted": p}

    @app.get("/projects/{p}/export")
    def export_project(p: str, products: int = 0):
        data = engine.export_project(p, with_products=bool(products))
        return Response(content=data, media_type="application/gzip")

    # -- sources ---------------------------------------------------------------

    @app.put("/projects/{p}/sources/{path:path}")
    async def put_source(p: str, path: str, request: Request):
        attributes = {}
        for name, value in request.headers.items():
            if name.lower().startswith(ATTR_HEADER_PREFIX):
                attributes[name[len(ATTR_HEADER_PREFIX):]] = value
        origin_page = request.headers.get("x-ww-origin-page")
        origin_rev = request.headers.get("x-ww-origin-revision")
        origin = (origin_page, origin_rev) if origin_page else None
        content = await request.body()
        revision = engine.store.put_source_file(p, SourceFile(
            filename=path, content=content, attributes=attributes,
            origin=origin))
        return {"revision": revision}

    @app.delete("/projects/{p}/sources/{path:path}")
    def delete_source(p: str, path: str):
        return {"removed": engine.store.remove_source_file(p, path)}

    # -- files -------------------------------------------------------------------

    @app.get("/projects/{p}/files/{path:path}")
    def get_file(p: str, path: str, session: str = PERSISTENT_ID, make: int = 0):
        if session == PERSISTENT_ID and not make:
            # Keep the persistent dir current so freshly pushed sources are
            # servable without an explicit make round trip.
            engine.workspace.sync(p, session)
        view = engine.workspace.get_file(p, session, path,
                                         make_first=bool(make))
        return Response(content=view.bytes, media_type=view.media_type)

    @app.get("/projects/{p}/files")
    def list_files(p: str, session: str = PERSISTENT_ID):
        if session == PERSISTENT_ID:
            engine.workspace.sync(p, session)
        return [v.to_dict() for v in engine.workspace.list_files(p, session)]

    @app.post("/projects/{p}/make")
    async def make_target(p: str, request: Request):
        body = await request.json()
        session = body.get("session") or PERSISTENT_ID
        limits = (ResourceLimits.from_dict(body["limits"])
                  if body.get("limits") else None)
        engine.workspace.sync(p, session)
        result = engine.workspace.make_target(p, session, body["target"],
                                              limits=limits)
        return result.to_dict()

    # -- sessions -----------------------------------------------------------------

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        ref = engine.sessions.create(body["projects"], kind="preview")
        return {"id": ref.id, "kind": ref.kind, "projects": ref.projects,
                "created_at": ref.created_at}

    @app.post("/sessions/{sid}/merge")
    def merge_session(sid: str):
        return engine.sessions.merge(sid).to_dict()

    @app.delete("/sessions/{sid}")
    def destroy_session(sid: str):
        engine.sessions.destroy(sid)
        return {"destroyed": sid}

    # -- jobs ------------------------------------------------------------------------

    @app.post("/jobs", status_code=201)
    async def start_job(request: Request):
        body = await request.json()
        limits = (ResourceLimits.from_dict(body["limits"])
                  if body.get("limits") else None)
        job = engine.jobs.start_job(body["project"], body["target"],
                                    limits=limits)
        return job.to_dict()

    @app.get("/jobs")
    def list_jobs(project: str | None = None):
        return [j.to_dict() for j in engine.jobs.list_jobs(project)]

    @app.get("/jobs/{jid}")
    def get_job(jid: str):
        job = engine.jobs.get_job(jid)
        body = job.to_dict()
        body["log_tail"] = engine.jobs.job_log_tail(jid).decode("utf-8", "replace")
        return body

    @app.post("/jobs/{jid}/kill")
    def kill_job(jid: str):
        return engine.jobs.kill_job(jid).to_dict()

    @app.post("/jobs/{jid}/merge")
    def merge_job(jid: str):
        return engine.jobs.merge_job(jid).to_dict()

    @app.delete("/jobs/{jid}")
    def destroy_job(jid: str):
        engine.jobs.destroy_job(jid)
        return {"destroyed": jid}

    # -- render / deps ---------------------------------------------------------------

    @app.post("/render")
    async def render(request: Request):
        body = await request.json()
        rendered, session_id = engine.render(
            body["page_name"], body["text"],
            session_id=body.get("session"),
            mathml=bool(body.get("mathml", False)))
        out = rendered.to_dict()
        out["session"] = session_id
        return out

    @app.post("/dependencies", status_code=201)
    async def declare_dependency(request: Request):
        body = await request.json()
        engine.deps.declare_dependency(body["dependent"], body["prerequisite"])
        return {"dependent": body["dependent"],
                "prerequisite": body["prerequisite"]}

    return app


def _options_from_json(d) -> ProjectOptions:
    d = d or {}
    ext = d.get("external_source")
    return ProjectOptions(
        external_source=ExternalSource(kind=ext["kind"], locator=ext["locator"])
        if ext else None,
        detached_subdirs=list(d.get("detached_subdirs", [])),
        dependencies=list(d.get("dependencies", [])),
    )


def _project_dict(project, sources=None) -> dict:
    out = {
        "name": project.name,
        "revision": project.revision,
        "created_at": project.created_at,
        "options": project.options.to_dict(),
    }
    if sources is not None:
        out["sources"] = sources
    return out


def serve(config: EngineConfig) -> None:
    """Run the self-contained HTTP service until interrupted."""
    import uvicorn
    engine = Engine(config)
    app = create_app(engine)
    try:
        uvicorn.run(app, host=config.bind_host, port=config.bind_port,
                    log_level="info")
    finally:
        engine.close()

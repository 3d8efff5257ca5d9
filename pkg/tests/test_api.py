import re
import time

import pytest
from fastapi.testclient import TestClient

from wwengine.api import create_app
from wwengine.errors import ALL_ERRORS

from .helpers import FIG1_PAGE, REVERSE_MAKEFILE, make_engine


@pytest.fixture
def client(engine):
    return TestClient(create_app(engine))


@pytest.fixture
def auth_client(engine_root):
    engine = make_engine(root=engine_root, token="s3cret")
    yield TestClient(create_app(engine))
    engine.close()


def wait_job(client, job_id, timeout=15.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = client.get("/jobs/%s" % job_id).json()
        if job["state"] in ("succeeded", "failed", "killed"):
            return job
        time.sleep(0.05)
    raise AssertionError("job never finished")


class TestMetaAndAuth:
    def test_healthz(self, client):
        body = client.get("/healthz").json()
        assert body["status"] == "ok"

    def test_mutating_without_token_rejected(self, auth_client):
        r = auth_client.post("/projects", json={"name": "P"})
        assert r.status_code == 401
        assert r.json()["code"] == "Unauthorized"

    def test_wrong_token_rejected(self, auth_client):
        r = auth_client.post("/projects", json={"name": "P"},
                             headers={"Authorization": "Bearer wrong"})
        assert r.status_code == 401

    def test_right_token_accepted_and_reads_open(self, auth_client):
        r = auth_client.post("/projects", json={"name": "P"},
                             headers={"Authorization": "Bearer s3cret"})
        assert r.status_code == 201
        assert auth_client.get("/projects").json() == ["P"]

    def test_no_token_configured_means_open(self, client):
        assert client.post("/projects", json={"name": "P"}).status_code == 201


class TestErrorContract:
    def test_every_error_has_unique_code_and_real_status(self):
        codes = [e.code for e in ALL_ERRORS]
        assert len(codes) == len(set(codes))
        assert all(400 <= e.http_status <= 599 for e in ALL_ERRORS)

    @pytest.mark.parametrize("method,url,kwargs,code,status", [
        ("get", "/projects/ghost", {}, "NoSuchProject", 404),
        ("get", "/jobs/ghost", {}, "NoSuchJob", 404),
        ("delete", "/sessions/ghost", {}, "NoSuchSession", 404),
        ("post", "/projects", {"json": {"name": "a/b"}}, "InvalidName", 400),
        ("post", "/projects/import", {"content": b"junk"}, "BadArchive", 400),
    ])
    def test_error_body_shape(self, client, method, url, kwargs, code, status):
        r = getattr(client, method)(url, **kwargs)
        assert r.status_code == status
        body = r.json()
        assert body["code"] == code
        assert isinstance(body["message"], str) and body["message"]

    def test_duplicate_project(self, client):
        client.post("/projects", json={"name": "Twice"})
        r = client.post("/projects", json={"name": "Twice"})
        assert (r.status_code, r.json()["code"]) == (409, "DuplicateProject")

    def test_dependency_cycle(self, client):
        client.post("/projects", json={"name": "a"})
        client.post("/projects", json={"name": "b"})
        client.post("/dependencies", json={"dependent": "a",
                                           "prerequisite": "b"})
        r = client.post("/dependencies", json={"dependent": "b",
                                               "prerequisite": "a"})
        assert (r.status_code, r.json()["code"]) == (409, "CycleDetected")

    def test_traversal_source_path(self, client):
        client.post("/projects", json={"name": "P"})
        r = client.put("/projects/P/sources/.%2e/escape", content=b"x")
        assert r.status_code in (400, 404)


class TestSourcesAndFiles:
    def test_raw_byte_round_trip(self, client):
        client.post("/projects", json={"name": "P"})
        payload = bytes(range(256)) * 4
        r = client.put("/projects/P/sources/blob.bin", content=payload)
        assert r.json() == {"revision": 1}
        got = client.get("/projects/P/files/blob.bin")
        assert got.status_code == 200
        assert got.content == payload
        assert got.headers["content-type"].startswith(
            "application/octet-stream")

    def test_media_type_from_extension(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/page.html", content=b"<b>hi</b>")
        got = client.get("/projects/P/files/page.html")
        assert got.headers["content-type"].startswith("text/html")

    def test_attribute_headers_stored(self, client, engine):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/doc.tex", content=b"x",
                   headers={"X-WW-Attr-Display": "none",
                            "X-WW-Origin-Page": "Some page"})
        sf = engine.store.get_source_file("P", "doc.tex")
        assert sf.attributes == {"display": "none"}
        assert sf.origin[0] == "Some page"

    def test_delete_source(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/a.txt", content=b"x")
        assert client.delete("/projects/P/sources/a.txt").json() == \
            {"removed": True}
        assert client.get("/projects/P/files/a.txt").status_code == 404

    def test_list_files_includes_products(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/example.txt", content=b"a\nb\n")
        client.put("/projects/P/sources/Makefile",
                   content=REVERSE_MAKEFILE.encode())
        r = client.post("/projects/P/make", json={"target": "example.out"})
        assert r.json()["status"] == "succeeded"
        paths = [f["path"] for f in client.get("/projects/P/files").json()]
        assert "example.out" in paths and "example.txt" in paths

    def test_get_file_with_make_builds_on_demand(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/fig.R", content=b"plot(1);")
        got = client.get("/projects/P/files/fig.Rout.png?make=1")
        assert got.status_code == 200
        assert got.content.startswith(b"\x89PNG")

    def test_failed_make_returns_result_payload(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/Makefile",
                   content=b"bad.txt:\n\techo broken >&2; exit 1\n")
        r = client.post("/projects/P/make", json={"target": "bad.txt"})
        assert r.status_code == 200  # a failed make is still a valid answer
        body = r.json()
        assert body["status"] == "failed" and "broken" in body["log"]

    def test_project_detail_lists_sources(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/a.txt", content=b"x")
        body = client.get("/projects/P").json()
        assert "a.txt" in body["sources"]

    def test_delete_project(self, client):
        client.post("/projects", json={"name": "Gone"})
        assert client.delete("/projects/Gone").status_code == 200
        assert client.get("/projects/Gone").status_code == 404


class TestSessions:
    def test_preview_isolation_and_merge(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/fig.R", content=b"plot(1);")
        sid = client.post("/sessions", json={"projects": ["P"]}).json()["id"]
        r = client.post("/projects/P/make",
                        json={"target": "fig.Rout.png", "session": sid})
        assert r.json()["status"] == "succeeded"
        # built only in the session, not in the persistent tree
        assert client.get("/projects/P/files/fig.Rout.png").status_code == 404
        assert client.get("/projects/P/files/fig.Rout.png?session=" +
                          sid).status_code == 200
        merged = client.post("/sessions/%s/merge" % sid).json()
        assert "fig.Rout.png" in merged["copied"]
        assert client.get("/projects/P/files/fig.Rout.png").status_code == 200

    def test_destroy_session(self, client):
        client.post("/projects", json={"name": "P"})
        sid = client.post("/sessions", json={"projects": ["P"]}).json()["id"]
        assert client.delete("/sessions/%s" % sid).status_code == 200
        assert client.delete("/sessions/%s" % sid).status_code == 404


class TestJobs:
    def test_job_round_trip(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/Makefile",
                   content=b"out.txt:\n\techo built > $@\n")
        job = client.post("/jobs", json={"project": "P",
                                         "target": "out.txt"}).json()
        assert job["state"] == "queued"
        done = wait_job(client, job["id"])
        assert done["state"] == "succeeded"
        assert "out.txt" in done["log_tail"]
        merged = client.post("/jobs/%s/merge" % job["id"]).json()
        assert "out.txt" in merged["copied"]
        assert client.delete("/jobs/%s" % job["id"]).status_code == 200
        assert client.get("/jobs/%s" % job["id"]).status_code == 404

    def test_kill_running_job(self, client):
        client.post("/projects", json={"name": "P"})
        client.put("/projects/P/sources/Makefile",
                   content=b"slow:\n\tsleep 60\n")
        job = client.post("/jobs", json={"project": "P",
                                         "target": "slow"}).json()
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            if client.get("/jobs/%s" % job["id"]).json()["state"] == "running":
                break
            time.sleep(0.05)
        client.post("/jobs/%s/kill" % job["id"])
        assert wait_job(client, job["id"])["state"] == "killed"

    def test_filter_by_project(self, client):
        client.post("/projects", json={"name": "P"})
        client.post("/projects", json={"name": "Q"})
        client.put("/projects/P/sources/Makefile",
                   content=b"out.txt:\n\techo x > $@\n")
        job = client.post("/jobs", json={"project": "P",
                                         "target": "out.txt"}).json()
        assert client.get("/jobs?project=Q").json() == []
        assert [j["id"] for j in client.get("/jobs?project=P").json()] == \
            [job["id"]]
        wait_job(client, job["id"])


class TestRender:
    def test_example_page_over_http(self, client):
        body = client.post("/render", json={
            "page_name": "R graphics example", "text": FIG1_PAGE}).json()
        assert body["diagnostics"] == []
        imgs = re.findall(r'<img[^>]*src="([^"]+)"', body["html"])
        assert len(imgs) == 1
        # the emitted URL must be directly fetchable and serve the PNG
        got = client.get(imgs[0].replace("&amp;", "&"))
        assert got.status_code == 200
        assert got.content.startswith(b"\x89PNG")
        assert body["session"] in imgs[0]

    def test_render_into_same_session_twice(self, client):
        text = "<source-file filename=a.txt project=P>\nv1\n</source-file>"
        first = client.post("/render", json={"page_name": "Page",
                                             "text": text}).json()
        sid = first["session"]
        text2 = text.replace("v1", "v2")
        second = client.post("/render", json={
            "page_name": "Page", "text": text2, "session": sid}).json()
        assert second["session"] == sid


class TestExportImport:
    def test_http_round_trip(self, client):
        client.post("/projects", json={"name": "Pkg"})
        client.put("/projects/Pkg/sources/a.txt", content=b"hello")
        exported = client.get("/projects/Pkg/export")
        assert exported.status_code == 200
        client.delete("/projects/Pkg")
        imported = client.post("/projects/import", content=exported.content)
        assert imported.json() == {"name": "Pkg"}
        assert client.get("/projects/Pkg/files/a.txt").content == b"hello"

"""`ww` command-line client (plus `ww serve` to run the service itself).

Connection settings come from --url/--token, the WW_URL/WW_TOKEN
environment, or ~/.wwclirc (JSON with "url" and "token").

Exit codes: 0 success, 1 operation failed (e.g. make did not succeed),
2 network/auth/server errors, 64 usage errors.
"""

from __future__ import annotations

import json
import os
import sys
import urllib.parse
from pathlib import Path

import click
import httpx

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NETWORK = 2
EXIT_USAGE = 64

RC_FILE = Path.home() / ".wwclirc"


class ClientError(Exception):
    def __init__(self, message, exit_code=EXIT_NETWORK):
        super().__init__(message)
        self.exit_code = exit_code


class Client:
    def __init__(self, url: str, token: str):
        if not url:
            raise ClientError("no service URL configured "
                              "(--url, WW_URL, or ~/.wwclirc)", EXIT_USAGE)
        self.base = url.rstrip("/")
        self.http = httpx.Client(timeout=600.0)
        self.token = token

    def _headers(self, extra=None):
        headers = dict(extra or {})
        if self.token:
            headers["Authorization"] = "Bearer " + self.token
        return headers

    def request(self, method, path, **kw):
        headers = self._headers(kw.pop("headers", None))
        try:
            resp = self.http.request(method, self.base + path,
                                     headers=headers, **kw)
        except httpx.HTTPError as e:
            raise ClientError("cannot reach %s: %s" % (self.base, e))
        if resp.status_code >= 400:
            try:
                err = resp.json()
                msg = "%s: %s" % (err.get("code"), err.get("message"))
            except ValueError:
                msg = resp.text
            raise ClientError("server said %d: %s" % (resp.status_code, msg))
        return resp


def quote(s: str) -> str:
    return urllib.parse.quote(s, safe="")


def quote_path(s: str) -> str:
    return urllib.parse.quote(s)


@click.group()
@click.option("--url", default=None, help="service base URL")
@click.option("--token", default=None, help="bearer token")
@click.pass_context
def cli(ctx, url, token):
    """Client for a project-engine service."""
    rc = {}
    if RC_FILE.exists():
        try:
            rc = json.loads(RC_FILE.read_text())
        except ValueError:
            rc = {}
    ctx.obj = {
        "url": url or os.environ.get("WW_URL") or rc.get("url"),
        "token": token or os.environ.get("WW_TOKEN") or rc.get("token", ""),
    }


def client(ctx) -> Client:
    return Client(ctx.obj["url"], ctx.obj["token"])


@cli.command()
@click.argument("project")
@click.argument("directory", type=click.Path(file_okay=False))
@click.pass_context
def push(ctx, project, directory):
    """Upload every file under DIRECTORY as a source of PROJECT."""
    c = client(ctx)
    names = c.request("GET", "/projects").json()
    if project not in names:
        c.request("POST", "/projects", json={"name": project})
    base = Path(directory)
    count = 0
    for path in sorted(base.rglob("*")):
        if not path.is_file():
            continue
        rel = path.relative_to(base).as_posix()
        c.request("PUT", "/projects/%s/sources/%s" % (quote(project),
                                                      quote_path(rel)),
                  content=path.read_bytes())
        count += 1
    click.echo("pushed %d files to %s" % (count, project))


@cli.command()
@click.argument("project")
@click.argument("directory", type=click.Path(file_okay=False))
@click.pass_context
def pull(ctx, project, directory):
    """Download PROJECT's working-directory files into DIRECTORY."""
    c = client(ctx)
    listing = c.request("GET", "/projects/%s/files" % quote(project)).json()
    base = Path(directory)
    for entry in listing:
        rel = entry["path"]
        data = c.request("GET", "/projects/%s/files/%s"
                         % (quote(project), quote_path(rel))).content
        dest = base / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(data)
    click.echo("pulled %d files from %s" % (len(listing), project))


@cli.command()
@click.argument("project")
@click.argument("path")
@click.option("--make/--no-make", "do_make", default=False,
              help="build the file before fetching")
@click.pass_context
def get(ctx, project, path, do_make):
    """Print one project file to stdout."""
    c = client(ctx)
    resp = c.request("GET", "/projects/%s/files/%s?make=%d"
                     % (quote(project), quote_path(path), int(do_make)))
    sys.stdout.buffer.write(resp.content)


@cli.command(name="make")
@click.argument("project")
@click.argument("target")
@click.pass_context
def make_cmd(ctx, project, target):
    """Sync PROJECT and make TARGET; prints the result and the log."""
    c = client(ctx)
    result = c.request("POST", "/projects/%s/make" % quote(project),
                       json={"target": target}).json()
    click.echo("status: %s (exit %s, %.2fs)" % (
        result["status"], result["exit_code"], result["duration"]))
    if result["files_changed"]:
        click.echo("changed: " + " ".join(result["files_changed"]))
    if result["log"]:
        click.echo(result["log"], nl=False)
    if result["status"] != "succeeded":
        sys.exit(EXIT_FAILURE)


@cli.command()
@click.option("--project", default=None)
@click.pass_context
def jobs(ctx, project):
    """List background jobs, newest first."""
    c = client(ctx)
    path = "/jobs" + ("?project=" + quote(project) if project else "")
    rows = c.request("GET", path).json()
    for j in rows:
        click.echo("%-18s %-10s %-20s %s" % (j["id"], j["state"],
                                             j["project"], j["target"]))
    if not rows:
        click.echo("(no jobs)")


@cli.group()
def job():
    """Operate on one background job."""


@job.command("kill")
@click.argument("job_id")
@click.pass_context
def job_kill(ctx, job_id):
    j = client(ctx).request("POST", "/jobs/%s/kill" % quote(job_id)).json()
    click.echo("%s: %s" % (j["id"], j["state"]))


@job.command("merge")
@click.argument("job_id")
@click.pass_context
def job_merge(ctx, job_id):
    report = client(ctx).request("POST", "/jobs/%s/merge" % quote(job_id)).json()
    click.echo("copied: %s" % " ".join(report["copied"]) or "(nothing)")
    if report["skipped_conflicts"]:
        click.echo("conflicts: %s" % " ".join(report["skipped_conflicts"]))


@job.command("destroy")
@click.argument("job_id")
@click.pass_context
def job_destroy(ctx, job_id):
    client(ctx).request("DELETE", "/jobs/%s" % quote(job_id))
    click.echo("destroyed %s" % job_id)


@cli.command()
@click.argument("project")
@click.argument("outfile", type=click.Path(dir_okay=False))
@click.option("--with-products", is_flag=True,
              help="include persistent-session build products")
@click.pass_context
def export(ctx, project, outfile, with_products):
    """Write PROJECT as a tar.gz package to OUTFILE."""
    c = client(ctx)
    resp = c.request("GET", "/projects/%s/export?products=%d"
                     % (quote(project), int(with_products)))
    Path(outfile).write_bytes(resp.content)
    click.echo("wrote %s (%d bytes)" % (outfile, len(resp.content)))


@cli.command(name="import")
@click.argument("infile", type=click.Path(exists=True, dir_okay=False))
@click.option("--merge", is_flag=True,
              help="overwrite an existing project source by source")
@click.pass_context
def import_cmd(ctx, infile, merge):
    """Import a tar.gz package produced by export."""
    c = client(ctx)
    resp = c.request("POST", "/projects/import?merge=%d" % int(merge),
                     content=Path(infile).read_bytes())
    click.echo("imported project %s" % resp.json()["name"])


@cli.command()
@click.argument("pagefile", type=click.Path(exists=True, dir_okay=False))
@click.option("--page-name", default=None,
              help="defaults to the file name without extension")
@click.pass_context
def render(ctx, pagefile, page_name):
    """Render a page file (tangle + build + HTML) and print the HTML."""
    c = client(ctx)
    text = Path(pagefile).read_text()
    name = page_name or Path(pagefile).stem
    out = c.request("POST", "/render",
                    json={"page_name": name, "text": text}).json()
    click.echo(out["html"])
    for d in out["diagnostics"]:
        click.echo("diagnostic: %s: %s" % (d["code"], d["message"]), err=True)


@cli.command()
@click.option("--root", required=True, type=click.Path(file_okay=False))
@click.option("--token", "serve_token", default="")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8777, type=int)
@click.option("--config", "config_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON config file; flags override it")
def serve(root, serve_token, host, port, config_file):
    """Run the project-engine HTTP service."""
    from .api import serve as run_service
    from .config import EngineConfig
    if config_file:
        cfg = EngineConfig.from_file(config_file, root=root, token=serve_token,
                                     bind_host=host, bind_port=port)
    else:
        cfg = EngineConfig(root=root, token=serve_token,
                           bind_host=host, bind_port=port)
    run_service(cfg)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False, prog_name="ww")
        return EXIT_OK
    except click.UsageError as e:
        click.echo("usage error: %s" % e.format_message(), err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_NETWORK
    except click.exceptions.Abort:
        return EXIT_NETWORK
    except ClientError as e:
        click.echo(str(e), err=True)
        return e.exit_code
    except SystemExit as e:
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())

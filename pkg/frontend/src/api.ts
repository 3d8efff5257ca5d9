/** Typed client for the project-engine HTTP API.
 *
 * The UI performs no computation of its own: everything it displays comes
 * back from these calls.  Errors are surfaced as ApiError carrying the
 * server's stable error code.
 */

export interface Diagnostic {
  code: string;
  offset: number;
  message: string;
}

export interface RenderResponse {
  html: string;
  diagnostics: Diagnostic[];
  jobs: Job[];
  session: string;
}

export interface MergeReport {
  copied: string[];
  skipped_conflicts: string[];
  deleted: string[];
}

export interface Job {
  id: string;
  project: string;
  target: string;
  state: "queued" | "running" | "succeeded" | "failed" | "killed";
  session_id: string;
  submitted_at: number;
  started_at: number | null;
  ended_at: number | null;
  merged: boolean;
  log_tail?: string;
}

export interface FileEntry {
  path: string;
  size: number;
  media_type: string;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

const TERMINAL_STATES = ["succeeded", "failed", "killed"];

export function isTerminal(job: Job): boolean {
  return TERMINAL_STATES.includes(job.state);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private token: string = "",
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (e) {
      throw new ApiError("Unreachable", `cannot reach ${this.baseUrl}: ${e}`, 0);
    }
    if (!resp.ok) {
      let code = "HttpError";
      let message = `${resp.status} ${resp.statusText}`;
      try {
        const err = (await resp.json()) as { code?: string; message?: string };
        if (err.code) code = err.code;
        if (err.message) message = err.message;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(code, message, resp.status);
    }
    return (await resp.json()) as T;
  }

  render(
    pageName: string,
    text: string,
    session?: string | null,
    mathml = false,
  ): Promise<RenderResponse> {
    const body: Record<string, unknown> = { page_name: pageName, text, mathml };
    if (session) body["session"] = session;
    return this.request("POST", "/render", body);
  }

  mergeSession(sessionId: string): Promise<MergeReport> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/merge`);
  }

  destroySession(sessionId: string): Promise<unknown> {
    return this.request("DELETE", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  listJobs(project?: string): Promise<Job[]> {
    const query = project ? `?project=${encodeURIComponent(project)}` : "";
    return this.request("GET", `/jobs${query}`);
  }

  getJob(jobId: string): Promise<Job> {
    return this.request("GET", `/jobs/${encodeURIComponent(jobId)}`);
  }

  startJob(project: string, target: string): Promise<Job> {
    return this.request("POST", "/jobs", { project, target });
  }

  killJob(jobId: string): Promise<Job> {
    return this.request("POST", `/jobs/${encodeURIComponent(jobId)}/kill`);
  }

  mergeJob(jobId: string): Promise<MergeReport> {
    return this.request("POST", `/jobs/${encodeURIComponent(jobId)}/merge`);
  }

  destroyJob(jobId: string): Promise<unknown> {
    return this.request("DELETE", `/jobs/${encodeURIComponent(jobId)}`);
  }

  listFiles(project: string, session?: string): Promise<FileEntry[]> {
    const query = session ? `?session=${encodeURIComponent(session)}` : "";
    return this.request(
      "GET",
      `/projects/${encodeURIComponent(project)}/files${query}`,
    );
  }

  /** URL for fetching/browsing one working-directory file. */
  fileUrl(project: string, path: string, session?: string): string {
    const encodedPath = path.split("/").map(encodeURIComponent).join("/");
    const query = session ? `?session=${encodeURIComponent(session)}` : "";
    return `${this.baseUrl}/projects/${encodeURIComponent(project)}/files/${encodedPath}${query}`;
  }
}

/** Background-job dashboard: a table that polls GET /jobs and offers
 * kill / merge / destroy / browse per job.
 *
 * Polling, not push: state transitions show up within one interval
 * (default 2 s).  Actions trigger an immediate refresh.
 */

import { ApiClient, Job, isTerminal } from "./api.js";

export interface DashboardOptions {
  project?: string;
  pollIntervalMs?: number;
}

export class JobDashboard {
  private timer: ReturnType<typeof setInterval> | null = null;
  private readonly pollIntervalMs: number;
  private readonly project?: string;
  lastError: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly container: HTMLElement,
    options: DashboardOptions = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 2000;
    this.project = options.project;
  }

  start(): void {
    if (this.timer !== null) return;
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async refresh(): Promise<void> {
    let jobs: Job[];
    try {
      jobs = await this.api.listJobs(this.project);
      this.lastError = null;
    } catch (e) {
      this.lastError = e instanceof Error ? e.message : String(e);
      return; // keep the last good view on transient errors
    }
    this.render(jobs);
  }

  private render(jobs: Job[]): void {
    this.container.textContent = "";
    if (jobs.length === 0) {
      const empty = document.createElement("p");
      empty.className = "ww-jobs-empty";
      empty.textContent = "no background jobs";
      this.container.appendChild(empty);
      return;
    }
    const table = document.createElement("table");
    table.className = "ww-jobs";
    for (const job of jobs) {
      table.appendChild(this.row(job));
    }
    this.container.appendChild(table);
  }

  private row(job: Job): HTMLTableRowElement {
    const tr = document.createElement("tr");
    tr.dataset["jobId"] = job.id;
    tr.dataset["state"] = job.state;
    for (const text of [job.id.slice(0, 8), job.project, job.target, job.state]) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }
    const actions = document.createElement("td");
    if (!isTerminal(job)) {
      actions.appendChild(this.button("kill", () => this.api.killJob(job.id)));
    } else {
      actions.appendChild(this.button("merge", () => this.api.mergeJob(job.id)));
      actions.appendChild(this.button("destroy", () => this.api.destroyJob(job.id)));
    }
    actions.appendChild(this.browseLink(job));
    tr.appendChild(actions);
    return tr;
  }

  private button(label: string, action: () => Promise<unknown>): HTMLButtonElement {
    const b = document.createElement("button");
    b.textContent = label;
    b.className = `ww-job-${label}`;
    b.addEventListener("click", () => {
      action()
        .catch((e) => {
          this.lastError = e instanceof Error ? e.message : String(e);
        })
        .finally(() => void this.refresh());
    });
    return b;
  }

  private browseLink(job: Job): HTMLAnchorElement {
    const a = document.createElement("a");
    a.textContent = "browse";
    a.className = "ww-job-browse";
    a.href = "#";
    a.addEventListener("click", (ev) => {
      ev.preventDefault();
      void this.browse(job);
    });
    return a;
  }

  private async browse(job: Job): Promise<void> {
    try {
      const files = await this.api.listFiles(job.project, job.session_id);
      const list = document.createElement("ul");
      list.className = "ww-job-files";
      list.dataset["jobId"] = job.id;
      for (const f of files) {
        const li = document.createElement("li");
        const link = document.createElement("a");
        link.href = this.api.fileUrl(job.project, f.path, job.session_id);
        link.textContent = `${f.path} (${f.size} bytes)`;
        li.appendChild(link);
        list.appendChild(li);
      }
      this.container.appendChild(list);
    } catch (e) {
      this.lastError = e instanceof Error ? e.message : String(e);
    }
  }
}

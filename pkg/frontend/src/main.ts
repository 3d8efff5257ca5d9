/** Page wiring: editor textarea + preview pane + job dashboard.
 *
 * The service URL and bearer token are entered once and kept in session
 * storage.  Page text lives in the browser only; load/save it with the
 * file pickers.
 */

import { ApiClient } from "./api.js";
import {
  EditorState,
  discardAction,
  editDraft,
  initialState,
  previewAction,
  saveAction,
} from "./editor.js";
import { JobDashboard } from "./dashboard.js";

function requireEl<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id} in the page`);
  return el as T;
}

export function mount(root: Document = document): void {
  const urlInput = requireEl<HTMLInputElement>("service-url");
  const tokenInput = requireEl<HTMLInputElement>("service-token");
  const pageNameInput = requireEl<HTMLInputElement>("page-name");
  const draft = requireEl<HTMLTextAreaElement>("draft");
  const previewPane = requireEl<HTMLElement>("preview");
  const diagnosticsPane = requireEl<HTMLElement>("diagnostics");
  const statusPane = requireEl<HTMLElement>("status");
  const jobsPane = requireEl<HTMLElement>("jobs");
  const mathmlBox = requireEl<HTMLInputElement>("mathml");

  urlInput.value = sessionStorage.getItem("ww-url") ?? "http://127.0.0.1:8777";
  tokenInput.value = sessionStorage.getItem("ww-token") ?? "";

  let api = new ApiClient(urlInput.value, tokenInput.value);
  let state: EditorState = initialState(pageNameInput.value || "Untitled");
  let dashboard = new JobDashboard(api, jobsPane);
  dashboard.start();

  const reconnect = () => {
    sessionStorage.setItem("ww-url", urlInput.value);
    sessionStorage.setItem("ww-token", tokenInput.value);
    api = new ApiClient(urlInput.value, tokenInput.value);
    dashboard.stop();
    dashboard = new JobDashboard(api, jobsPane);
    dashboard.start();
  };
  urlInput.addEventListener("change", reconnect);
  tokenInput.addEventListener("change", reconnect);

  pageNameInput.addEventListener("change", () => {
    state = { ...state, pageName: pageNameInput.value || "Untitled" };
  });
  draft.addEventListener("input", () => {
    state = editDraft(state, draft.value);
    show();
  });

  const show = () => {
    previewPane.innerHTML = state.lastRender?.html ?? "";
    diagnosticsPane.textContent = (state.lastRender?.diagnostics ?? [])
      .map((d) => `${d.code}: ${d.message}`)
      .join("\n");
    const bits: string[] = [];
    if (state.dirty) bits.push("unsaved changes");
    if (state.activeSessionId) bits.push(`preview session ${state.activeSessionId}`);
    if (state.lastMerge) {
      bits.push(`saved: ${state.lastMerge.copied.length} files merged`);
      if (state.lastMerge.skipped_conflicts.length) {
        bits.push(`conflicts kept as-is: ${state.lastMerge.skipped_conflicts.join(", ")}`);
      }
    }
    if (state.error) bits.push(`error: ${state.error}`);
    statusPane.textContent = bits.join(" · ");
  };

  const wire = (id: string, action: () => Promise<EditorState>) => {
    requireEl<HTMLButtonElement>(id).addEventListener("click", () => {
      void action().then((next) => {
        state = next;
        show();
      });
    });
  };
  wire("preview-button", () => previewAction(state, api, mathmlBox.checked));
  wire("save-button", () => saveAction(state, api, mathmlBox.checked));
  wire("discard-button", () => discardAction(state, api));

  root.defaultView?.addEventListener("beforeunload", () => dashboard.stop());
}

if (typeof document !== "undefined" && document.getElementById("draft")) {
  mount();
}

/** Editor state machine: draft text, preview sessions, save/merge.
 *
 * The state is immutable; previewAction/saveAction return the next state.
 * A failed request never loses the draft -- it only fills `error`.
 */

import { ApiClient, Diagnostic, Job, MergeReport } from "./api.js";

export interface EditorState {
  pageName: string;
  draftText: string;
  /** Set iff a preview has been requested since the last save. */
  activeSessionId: string | null;
  lastRender: { html: string; diagnostics: Diagnostic[] } | null;
  /** Jobs of the page's projects, as reported by the last render. */
  jobBanner: Job[];
  lastMerge: MergeReport | null;
  dirty: boolean;
  error: string | null;
}

export function initialState(pageName: string, draftText = ""): EditorState {
  return {
    pageName,
    draftText,
    activeSessionId: null,
    lastRender: null,
    jobBanner: [],
    lastMerge: null,
    dirty: false,
    error: null,
  };
}

export function editDraft(state: EditorState, text: string): EditorState {
  return { ...state, draftText: text, dirty: true };
}

/** Render the draft into the active preview session (adopting the implicit
 * one the service creates on first preview). */
export async function previewAction(
  state: EditorState,
  api: ApiClient,
  mathml = false,
): Promise<EditorState> {
  if (!state.draftText.trim()) return state;
  try {
    const out = await api.render(
      state.pageName,
      state.draftText,
      state.activeSessionId,
      mathml,
    );
    return {
      ...state,
      activeSessionId: out.session,
      lastRender: { html: out.html, diagnostics: out.diagnostics },
      jobBanner: out.jobs,
      error: null,
    };
  } catch (e) {
    return { ...state, error: describe(e) };
  }
}

/** Save: render the final draft into the session, then merge it back.
 * Conflicts are surfaced through lastMerge.skipped_conflicts. */
export async function saveAction(
  state: EditorState,
  api: ApiClient,
  mathml = false,
): Promise<EditorState> {
  try {
    const out = await api.render(
      state.pageName,
      state.draftText,
      state.activeSessionId,
      mathml,
    );
    const report =
      out.session === "persistent"
        ? { copied: [], skipped_conflicts: [], deleted: [] }
        : await api.mergeSession(out.session);
    return {
      ...state,
      activeSessionId: null,
      lastRender: { html: out.html, diagnostics: out.diagnostics },
      jobBanner: out.jobs,
      lastMerge: report,
      dirty: false,
      error: null,
    };
  } catch (e) {
    return { ...state, error: describe(e) };
  }
}

/** Throw the preview session away without saving. */
export async function discardAction(
  state: EditorState,
  api: ApiClient,
): Promise<EditorState> {
  if (state.activeSessionId) {
    try {
      await api.destroySession(state.activeSessionId);
    } catch {
      /* already gone is fine */
    }
  }
  return { ...state, activeSessionId: null, lastRender: null, error: null };
}

function describe(e: unknown): string {
  return e instanceof Error ? e.message : String(e);
}

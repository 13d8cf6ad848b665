/**
 * Thin typed client for the ambisql service.
 *
 * Every state change in the UI round-trips through these four calls; there
 * is no client-only hint or session state.
 */

import {
  ApiError,
  AskRequest,
  AskResponse,
  FeedbackResponse,
  HintPayload,
} from "./types.js";

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async ask(req: AskRequest): Promise<AskResponse> {
    const resp = await fetch(this.url("/ask"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as AskResponse;
  }

  async feedback(
    sessionId: string,
    chosenCandidateId: string | null,
  ): Promise<FeedbackResponse> {
    const resp = await fetch(this.url("/feedback"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        session_id: sessionId,
        chosen_candidate_id: chosenCandidateId,
      }),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as FeedbackResponse;
  }

  async hints(userId: string): Promise<HintPayload[]> {
    const resp = await fetch(
      this.url(`/hints?user_id=${encodeURIComponent(userId)}`),
    );
    if (!resp.ok) throw await parseError(resp);
    const body = (await resp.json()) as { hints: HintPayload[] };
    return body.hints;
  }

  async deleteHint(hintId: string): Promise<void> {
    const resp = await fetch(this.url(`/hints/${encodeURIComponent(hintId)}`), {
      method: "DELETE",
    });
    if (!resp.ok) throw await parseError(resp);
  }
}

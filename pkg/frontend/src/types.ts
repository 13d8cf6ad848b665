/** Wire types for the ambisql HTTP API. */

export interface EntityMapping {
  entity: string;
  column: string; // "table.column"
}

export interface Candidate {
  id: string;
  sql: string;
  score: number | null; // nonconformity; lower is better
  confidence: number | null; // 1 - score, display only
  explanation: EntityMapping[];
}

export interface AskResponse {
  session_id: string;
  candidates: Candidate[];
}

export interface HintPayload {
  id: string;
  entity: string;
  preferred: string;
  rejected: string[];
  text: string;
  created_at: string;
}

export interface FeedbackResponse {
  hints_created: HintPayload[];
}

export interface AskRequest {
  user_id: string;
  db_id: string;
  question: string;
  k?: number;
  alpha_profile?: number;
}

/** Error surfaced by the API client: HTTP status plus the service detail. */
export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

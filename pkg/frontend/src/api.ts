/** Typed client for the annotation service wire protocol. */

import type { Answer, PairRecord, Progress, QualificationOutcome, VotePayload } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface ServiceApi {
  qualificationStatus(annotatorId: string): Promise<QualificationOutcome | null>;
  qualificationPairs(): Promise<PairRecord[]>;
  qualify(annotatorId: string, answers: Answer[]): Promise<QualificationOutcome>;
  nextTask(annotatorId: string): Promise<PairRecord | null>;
  submitVote(payload: VotePayload): Promise<void>;
  progress(): Promise<Progress>;
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "error";
  let message = `${response.status}`;
  try {
    const body = (await response.json()) as { error?: string; message?: string };
    code = body.error ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body; keep defaults
  }
  return new ApiError(response.status, code, message);
}

export class HttpApi implements ServiceApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async post(path: string, body: unknown): Promise<Response> {
    return this.fetchFn(this.url(path), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async qualificationStatus(annotatorId: string): Promise<QualificationOutcome | null> {
    const response = await this.post("/annotators", { id: annotatorId });
    if (response.status === 404) return null;
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as QualificationOutcome;
  }

  async qualificationPairs(): Promise<PairRecord[]> {
    const response = await this.fetchFn(this.url("/qualification"));
    if (!response.ok) throw await parseError(response);
    const body = (await response.json()) as { pairs: PairRecord[] };
    return body.pairs;
  }

  async qualify(annotatorId: string, answers: Answer[]): Promise<QualificationOutcome> {
    const response = await this.post("/annotators", { id: annotatorId, answers });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as QualificationOutcome;
  }

  async nextTask(annotatorId: string): Promise<PairRecord | null> {
    const response = await this.fetchFn(
      this.url(`/tasks/next?annotator=${encodeURIComponent(annotatorId)}`),
    );
    if (response.status === 204) return null;
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as PairRecord;
  }

  async submitVote(payload: VotePayload): Promise<void> {
    const response = await this.post("/votes", payload);
    if (response.status !== 201) throw await parseError(response);
  }

  async progress(): Promise<Progress> {
    const response = await this.fetchFn(this.url("/progress"));
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as Progress;
  }
}

import type { FindingKey, QueueResponse, VerdictsResponse } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number | null,
    public readonly retryable: boolean,
  ) {
    super(message);
  }
}

/** Thin fetch wrapper around the review service; the token rides as a bearer header. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const headers = {
      Authorization: `Bearer ${this.token}`,
      "Content-Type": "application/json",
      ...(init?.headers ?? {}),
    };
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, { ...init, headers });
    } catch (error) {
      // Network failures are always retryable; the draft must survive them.
      throw new ApiError(`network failure: ${String(error)}`, null, true);
    }
    if (!response.ok) {
      const body = await response.text().catch(() => "");
      // 409 means the store writer was briefly locked; the client may retry.
      const retryable = response.status === 409 || response.status >= 500;
      throw new ApiError(
        `${response.status}: ${body.slice(0, 200)}`,
        response.status,
        retryable,
      );
    }
    return response.json();
  }

  async getQueue(): Promise<QueueResponse> {
    return (await this.request("/api/queue")) as QueueResponse;
  }

  async submitJudgment(
    key: FindingKey,
    issuePlausible: boolean,
    improvementPlausible: boolean,
  ): Promise<void> {
    await this.request("/api/judgments", {
      method: "POST",
      body: JSON.stringify({
        finding_key: key,
        issue_plausible: issuePlausible,
        improvement_plausible: improvementPlausible,
      }),
    });
  }

  async getVerdicts(): Promise<VerdictsResponse> {
    return (await this.request("/api/verdicts")) as VerdictsResponse;
  }

  recordingUrl(item: { recording_url: string }): string {
    return `${this.baseUrl}${item.recording_url}`;
  }
}

// Thin fetch client for the review API. The UI talks to the server through
// this module only; configuration is limited to base URL and rater id.

import type {
  DisagreementOut,
  MetricsOut,
  OutreachRecordOut,
  PendingPair,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`API error ${status}`);
  }
}

async function parseDetail(response: Response): Promise<unknown> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    return body.detail ?? body;
  } catch {
    return response.statusText;
  }
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    public raterId: string,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    withRater = false,
  ): Promise<T> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (withRater) headers["X-Rater-Id"] = this.raterId;
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    return (await response.json()) as T;
  }

  registerRater(raterId: string): Promise<{ rater_id: string }> {
    return this.request("POST", "/v1/raters", { rater_id: raterId });
  }

  pending(): Promise<PendingPair[]> {
    return this.request("GET", `/v1/raters/${encodeURIComponent(this.raterId)}/pending`);
  }

  submitAdjudication(body: Record<string, unknown>): Promise<{ record_id: number }> {
    return this.request("POST", "/v1/adjudications", body, true);
  }

  disagreements(): Promise<DisagreementOut[]> {
    return this.request("GET", "/v1/disagreements");
  }

  submitConsensus(body: Record<string, unknown>): Promise<Record<string, unknown>> {
    return this.request("POST", "/v1/consensus", body);
  }

  outreachList(): Promise<OutreachRecordOut[]> {
    return this.request("GET", "/v1/outreach");
  }

  createOutreach(body: Record<string, unknown>): Promise<OutreachRecordOut> {
    return this.request("POST", "/v1/outreach", body);
  }

  updateOutreach(id: number, body: Record<string, unknown>): Promise<OutreachRecordOut> {
    return this.request("POST", `/v1/outreach/${id}`, body);
  }

  tickOutreach(today: string): Promise<OutreachRecordOut[]> {
    return this.request("POST", "/v1/outreach/tick", { today });
  }

  metrics(): Promise<MetricsOut> {
    return this.request("GET", "/v1/metrics");
  }
}

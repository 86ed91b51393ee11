/** Thin client for the prediction API; the fetch implementation is
 * injectable so tests can run against a mock. */

import type { PredictRequestBody } from "./state.js";

export interface QuestionOut {
  text: string;
  provider: string;
}

export interface PassageOut {
  doc_id: string;
  snippet: string;
  score: number;
  rank: number;
}

export interface PredictResponseBody {
  questions: QuestionOut[];
  passages: PassageOut[];
  variant_used: string;
  latency_ms: number;
}

export interface HealthBody {
  status: string;
  corpus_docs: number;
  providers: { name: string; reachable: boolean }[];
}

export interface DocumentBody {
  doc_id: string;
  text: string;
  title: string | null;
}

export class ApiError extends Error {
  constructor(
    readonly code: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private baseUrl: string;
  private readonly fetchImpl: FetchLike;
  private inflight: AbortController | null = null;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl;
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  setBaseUrl(baseUrl: string): void {
    this.baseUrl = baseUrl;
  }

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  /** One in-flight prediction at a time: a newer call aborts the older. */
  async predict(body: PredictRequestBody): Promise<PredictResponseBody> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const response = await this.fetchImpl(this.url("/api/predict"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
        signal: controller.signal,
      });
      return await this.parse<PredictResponseBody>(response);
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }

  async document(docId: string): Promise<DocumentBody> {
    const response = await this.fetchImpl(
      this.url("/api/document/" + encodeURIComponent(docId)),
    );
    return this.parse<DocumentBody>(response);
  }

  async health(): Promise<HealthBody> {
    const response = await this.fetchImpl(this.url("/api/health"));
    return this.parse<HealthBody>(response);
  }

  private async parse<T>(response: Response): Promise<T> {
    if (!response.ok) {
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { message?: string };
        if (body.message) message = body.message;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, message);
    }
    return (await response.json()) as T;
  }
}

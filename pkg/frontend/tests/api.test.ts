import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, type FetchLike, type PredictResponseBody } from "../src/api.js";
import { buildPredictRequest, expectedVariant, initialState } from "../src/state.js";

/** Mock API applying the server's routing rule to /api/predict bodies. */
function mockApi() {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    calls.push({ url, init });
    if (url.endsWith("/api/predict")) {
      const body = JSON.parse(String(init?.body ?? "{}"));
      const variant = expectedVariant(body);
      if (!variant) {
        return jsonResponse(400, { code: 400, message: "context or source must be nonempty" });
      }
      const response: PredictResponseBody = {
        questions: [{ text: `what about ${body.context ?? body.source}?`, provider: "mock" }],
        passages: [{ doc_id: "d1", snippet: "snippet", score: 1.0, rank: 1 }],
        variant_used: variant,
        latency_ms: 1,
      };
      return jsonResponse(200, response);
    }
    if (url.includes("/api/document/")) {
      const docId = decodeURIComponent(url.split("/api/document/")[1]);
      if (docId === "missing") {
        return jsonResponse(404, { code: 404, message: `unknown document '${docId}'` });
      }
      return jsonResponse(200, { doc_id: docId, text: "full text", title: null });
    }
    if (url.endsWith("/api/health")) {
      return jsonResponse(200, { status: "ok", corpus_docs: 3, providers: [] });
    }
    return jsonResponse(404, { code: 404, message: "no such route" });
  };
  return { fetchImpl, calls };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("predict round trip", () => {
  it("posts the exact request body and returns the parsed response", async () => {
    const { fetchImpl, calls } = mockApi();
    const client = new ApiClient("http://api.test/", fetchImpl);
    const response = await client.predict({
      context: "robin eggs",
      intent: "hatching time",
      modes: ["questions"],
      k: 10,
      n_questions: 3,
    });
    expect(response.variant_used).toBe("context_intent");
    expect(calls[0].url).toBe("http://api.test/api/predict");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      context: "robin eggs",
      intent: "hatching time",
      modes: ["questions"],
      k: 10,
      n_questions: 3,
    });
  });

  it("shows the routing badge for each field-presence combination", async () => {
    const { fetchImpl } = mockApi();
    const client = new ApiClient("http://api.test", fetchImpl);
    const cases: [Record<string, string>, string][] = [
      [{ context: "robin eggs", intent: "hatching time" }, "context_intent"],
      [{ source: "the whole document", intent: "hatching time" }, "source_intent"],
      [{ context: "robin eggs" }, "context"],
      [{ source: "the whole document" }, "source"],
    ];
    for (const [fields, badge] of cases) {
      const response = await client.predict({
        ...fields,
        modes: ["questions", "passages"],
        k: 10,
        n_questions: 3,
      } as never);
      expect(response.variant_used).toBe(badge);
      expect(expectedVariant(fields)).toBe(badge);
    }
  });

  it("drives the badge end to end from a selection state", async () => {
    const { fetchImpl } = mockApi();
    const client = new ApiClient("http://api.test", fetchImpl);
    const state = initialState();
    state.documentText = "the robin lays blue eggs";
    state.selection = { start: 4, end: 9 };
    const noIntent = await client.predict(buildPredictRequest(state));
    expect(noIntent.variant_used).toBe("context");
    state.intentText = "egg color";
    const withIntent = await client.predict(buildPredictRequest(state));
    expect(withIntent.variant_used).toBe("context_intent");
  });

  it("surfaces API errors with code and message", async () => {
    const { fetchImpl } = mockApi();
    const client = new ApiClient("http://api.test", fetchImpl);
    const failing = client.predict({ modes: ["questions"], k: 10, n_questions: 3 } as never);
    await expect(failing).rejects.toBeInstanceOf(ApiError);
    await expect(failing).rejects.toMatchObject({ code: 400 });
  });
});

describe("in-flight cancellation", () => {
  it("aborts the previous predict when a newer one starts", async () => {
    const seen: AbortSignal[] = [];
    let release: (() => void) | null = null;
    const fetchImpl: FetchLike = (url, init) => {
      seen.push(init!.signal!);
      return new Promise((resolve, reject) => {
        const finish = () =>
          resolve(
            jsonResponse(200, {
              questions: [],
              passages: [],
              variant_used: "context",
              latency_ms: 0,
            }),
          );
        init!.signal!.addEventListener("abort", () =>
          reject(new DOMException("aborted", "AbortError")),
        );
        if (release === null) {
          release = finish; // hold the first request open
        } else {
          finish();
        }
      });
    };
    const client = new ApiClient("http://api.test", fetchImpl);
    const body = { context: "robin", modes: ["questions"], k: 10, n_questions: 3 } as never;
    const first = client.predict(body);
    const second = client.predict(body);
    await expect(first).rejects.toMatchObject({ name: "AbortError" });
    await expect(second).resolves.toMatchObject({ variant_used: "context" });
    expect(seen[0].aborted).toBe(true);
    expect(seen[1].aborted).toBe(false);
  });
});

describe("document and health", () => {
  it("percent-encodes document ids", async () => {
    const { fetchImpl, calls } = mockApi();
    const client = new ApiClient("http://api.test", fetchImpl);
    const doc = await client.document("d one/two");
    expect(doc.text).toBe("full text");
    expect(calls[0].url).toBe("http://api.test/api/document/d%20one%2Ftwo");
    await expect(client.document("missing")).rejects.toMatchObject({ code: 404 });
  });

  it("fetches health", async () => {
    const { fetchImpl } = mockApi();
    const client = new ApiClient("http://api.test", fetchImpl);
    await expect(client.health()).resolves.toMatchObject({ status: "ok", corpus_docs: 3 });
  });
});

import { describe, expect, it } from "vitest";

import { ApiClient, type FetchLike } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function recordingFetch(responses: Response[]): { calls: Array<{ url: string; init?: RequestInit }>; fetch: FetchLike } {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const fetch: FetchLike = async (url, init) => {
    calls.push({ url, init });
    const next = responses.shift();
    if (!next) throw new Error("unexpected request");
    return next;
  };
  return { calls, fetch };
}

describe("ApiClient", () => {
  it("fetches node statuses", async () => {
    const nodes = [
      { node_id: "pir1", kind: "pir", value: 1, connected: true, fetched_at: 1 },
    ];
    const { calls, fetch } = recordingFetch([jsonResponse(200, nodes)]);
    const api = new ApiClient("", fetch);
    expect(await api.getNodes()).toEqual(nodes);
    expect(calls[0].url).toBe("/api/nodes");
  });

  it("fetches events with the base prefix applied", async () => {
    const { calls, fetch } = recordingFetch([jsonResponse(200, [])]);
    const api = new ApiClient("http://127.0.0.1:8080", fetch);
    expect(await api.getEvents()).toEqual([]);
    expect(calls[0].url).toBe("http://127.0.0.1:8080/api/events");
  });

  it("throws on a failed GET", async () => {
    const { fetch } = recordingFetch([jsonResponse(500, { error: "boom" })]);
    const api = new ApiClient("", fetch);
    await expect(api.getNodes()).rejects.toThrow("HTTP 500");
  });

  it("posts commands as JSON", async () => {
    const { calls, fetch } = recordingFetch([
      jsonResponse(200, { event_id: "evt-0001", state: "IDLE", resolution: "CEASED" }),
    ]);
    const api = new ApiClient("", fetch);
    const result = await api.postCommand("found_ok");
    expect(result).toEqual({ ok: true, status: 200 });
    expect(calls[0].url).toBe("/api/command");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ action: "found_ok" });
  });

  it("surfaces the API error message on conflict", async () => {
    const { fetch } = recordingFetch([
      jsonResponse(409, { error: "no active event to resolve (state IDLE)", state: "IDLE" }),
    ]);
    const api = new ApiClient("", fetch);
    const result = await api.postCommand("inform_authorities");
    expect(result.ok).toBe(false);
    expect(result.status).toBe(409);
    expect(result.error).toContain("no active event");
  });

  it("falls back to the status code when the error body is not JSON", async () => {
    const { fetch } = recordingFetch([new Response("oops", { status: 502 })]);
    const api = new ApiClient("", fetch);
    const result = await api.postCommand("found_ok");
    expect(result).toEqual({ ok: false, status: 502, error: "HTTP 502" });
  });

  it("builds capture and stream URLs", () => {
    const api = new ApiClient("http://host:1");
    expect(api.captureUrl("evt-0001")).toBe("http://host:1/api/events/evt-0001/capture");
    expect(api.streamUrl()).toBe("http://host:1/stream");
  });
});

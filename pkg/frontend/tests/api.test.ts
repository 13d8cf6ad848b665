import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { ApiError } from "../src/types.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("posts ask requests and parses the response", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ session_id: "s1", candidates: [] }),
    );
    vi.stubGlobal("fetch", fetchMock);
    const client = new ApiClient("http://svc");
    const resp = await client.ask({
      user_id: "u1",
      db_id: "school",
      question: "q",
      k: 3,
    });
    expect(resp.session_id).toBe("s1");
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("http://svc/ask");
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({
      user_id: "u1",
      db_id: "school",
      question: "q",
      k: 3,
    });
  });

  it("posts the chosen candidate id verbatim", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ hints_created: [] }),
    );
    vi.stubGlobal("fetch", fetchMock);
    await new ApiClient().feedback("sess-9", "c42");
    const body = JSON.parse(
      (fetchMock.mock.calls[0][1] as RequestInit).body as string,
    );
    expect(body).toEqual({ session_id: "sess-9", chosen_candidate_id: "c42" });
  });

  it("posts null for none-correct", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ hints_created: [] }),
    );
    vi.stubGlobal("fetch", fetchMock);
    await new ApiClient().feedback("sess-9", null);
    const body = JSON.parse(
      (fetchMock.mock.calls[0][1] as RequestInit).body as string,
    );
    expect(body.chosen_candidate_id).toBeNull();
  });

  it("surfaces service errors with status and detail", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(
        jsonResponse({ detail: "selector enabled but no calibration" }, 409),
      ),
    );
    const err = await new ApiClient().ask({
      user_id: "u",
      db_id: "d",
      question: "q",
    }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.message).toContain("calibration");
  });

  it("lists and deletes hints", async () => {
    const fetchMock = vi
      .fn()
      .mockResolvedValueOnce(jsonResponse({ hints: [{ id: "h1" }] }))
      .mockResolvedValueOnce(jsonResponse({ deleted: "h1" }));
    vi.stubGlobal("fetch", fetchMock);
    const client = new ApiClient();
    const hints = await client.hints("u 1");
    expect(hints).toHaveLength(1);
    expect(fetchMock.mock.calls[0][0]).toBe("/hints?user_id=u%201");
    await client.deleteHint("h1");
    expect(fetchMock.mock.calls[1][0]).toBe("/hints/h1");
    expect((fetchMock.mock.calls[1][1] as RequestInit).method).toBe("DELETE");
  });
});

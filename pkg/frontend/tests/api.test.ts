import { describe, expect, it } from "vitest";

import { ApiClient, ServiceError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("api client", () => {
  it("builds query strings for pagination and filters", async () => {
    const calls: string[] = [];
    const api = new ApiClient("http://svc", async (input) => {
      calls.push(input);
      return jsonResponse({ total: 0, offset: 0, entities: [] });
    });
    await api.getEntities("node", 50, 25);
    await api.getEntities(null, 0, 10);
    expect(calls[0]).toBe("http://svc/entities?type=node&offset=50&limit=25");
    expect(calls[1]).toBe("http://svc/entities?offset=0&limit=10");
  });

  it("surfaces field-level 422 details", async () => {
    const api = new ApiClient("", async () =>
      jsonResponse({ detail: { error: "bad value", field: "a.value" } }, 422),
    );
    try {
      await api.infer({ entities: [] });
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ServiceError);
      expect((err as ServiceError).status).toBe(422);
      expect((err as ServiceError).field).toBe("a.value");
      expect((err as ServiceError).message).toBe("bad value");
    }
  });

  it("wraps network failures as status 0", async () => {
    const api = new ApiClient("", async () => {
      throw new Error("connection refused");
    });
    await expect(api.getSchema()).rejects.toMatchObject({ status: 0 });
  });

  it("aborts the previous in-flight infer call", async () => {
    const signals: AbortSignal[] = [];
    const api = new ApiClient("", (_input, init) => {
      signals.push(init!.signal!);
      return new Promise<Response>((resolve, reject) => {
        init!.signal!.addEventListener("abort", () => reject(new Error("aborted")));
        setTimeout(() => resolve(jsonResponse({ entities: {} })), 5);
      });
    });
    const first = api.infer({ entities: [] });
    const second = api.infer({ entities: [] });
    await expect(first).rejects.toBeTruthy();
    await expect(second).resolves.toEqual({ entities: {} });
    expect(signals[0].aborted).toBe(true);
    expect(signals[1].aborted).toBe(false);
  });
});

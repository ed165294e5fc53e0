import { describe, expect, it, vi } from "vitest";

import { ServiceClient } from "../src/api";
import { boxToCanvasRect } from "../src/coords";
import { canSubmit, QuerySession, submitQuery } from "../src/session";

function okResponse(body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status: 200,
    headers: { "content-type": "application/json" },
  });
}

function groundBody(modelId: string, box: [number, number, number, number], stage = "general") {
  return { box_xyxy: box, model_id: modelId, stage, latency_ms: 1.5 };
}

function sessionWithImage(): QuerySession {
  const session = new QuerySession();
  session.setImage(new Blob([new Uint8Array([1, 2, 3])]), "img.png");
  return session;
}

describe("submitQuery", () => {
  it("issues one call per selected model and appends to history", async () => {
    const fetchSpy = vi.fn(async (url: string) => {
      expect(url).toBe("/api/ground");
      return okResponse(groundBody("m", [1, 2, 3, 4]));
    });
    const client = new ServiceClient("", fetchSpy);
    const session = sessionWithImage();
    const result = await submitQuery(client, session, "opacity", ["a", "b"]);
    expect(fetchSpy).toHaveBeenCalledTimes(2);
    expect(result.entries).toHaveLength(2);
    expect(session.history).toHaveLength(2);
    expect(result.errors).toHaveLength(0);
  });

  it("matches results to entries by request id, not arrival order", async () => {
    const resolvers: Array<(r: Response) => void> = [];
    const fetchSpy = vi.fn(
      (_url: string, init?: RequestInit) =>
        new Promise<Response>((resolve) => {
          resolvers.push(resolve);
          void init;
        }),
    );
    const client = new ServiceClient("", fetchSpy);
    const session = sessionWithImage();
    const pending = submitQuery(client, session, "opacity", ["first", "second"]);
    // resolve in reverse order
    resolvers[1](okResponse(groundBody("second", [5, 6, 7, 8])));
    resolvers[0](okResponse(groundBody("first", [1, 2, 3, 4])));
    const result = await pending;
    const byModel = new Map(result.entries.map((e) => [e.modelId, e]));
    expect(byModel.get("first")?.box).toEqual([1, 2, 3, 4]);
    expect(byModel.get("second")?.box).toEqual([5, 6, 7, 8]);
    expect(byModel.get("first")?.requestId).toBeLessThan(
      byModel.get("second")?.requestId as number,
    );
  });

  it("surfaces per-model errors with the failing model named", async () => {
    const fetchSpy = vi.fn(async (_url: string, init?: RequestInit) => {
      const form = init?.body as FormData;
      if (form.get("model_id") === "broken") {
        return new Response(
          JSON.stringify({ error: { field: "model_id", message: "unknown model" } }),
          { status: 404 },
        );
      }
      return okResponse(groundBody("fine", [1, 1, 2, 2]));
    });
    const client = new ServiceClient("", fetchSpy);
    const session = sessionWithImage();
    const result = await submitQuery(client, session, "opacity", ["fine", "broken"]);
    expect(result.entries).toHaveLength(1);
    expect(result.errors).toHaveLength(1);
    expect(result.errors[0].modelId).toBe("broken");
    expect(result.errors[0].message).toContain("404");
  });
});

describe("replay", () => {
  it("returns the stored box without any network call", async () => {
    const fetchSpy = vi.fn(async () => okResponse(groundBody("m", [9, 9, 20, 20])));
    const client = new ServiceClient("", fetchSpy);
    const session = sessionWithImage();
    const { entries } = await submitQuery(client, session, "opacity", ["m"]);
    expect(fetchSpy).toHaveBeenCalledTimes(1);

    const replayed = session.replay(entries[0].requestId);
    expect(replayed.box).toEqual([9, 9, 20, 20]);
    expect(fetchSpy).toHaveBeenCalledTimes(1); // zero additional calls
  });

  it("lands on the same image pixels after a zoom change", async () => {
    const client = new ServiceClient("", async () =>
      okResponse(groundBody("m", [10, 20, 30, 40])),
    );
    const session = sessionWithImage();
    const { entries } = await submitQuery(client, session, "opacity", ["m"]);
    const entry = session.replay(entries[0].requestId);

    const rectBefore = boxToCanvasRect({ zoom: 1, panX: 0, panY: 0 }, entry.box);
    const rectAfter = boxToCanvasRect({ zoom: 2.5, panX: 5, panY: 5 }, entry.box);
    expect([rectBefore.x, rectBefore.y]).toEqual([10, 20]);
    expect([rectAfter.x, rectAfter.y]).toEqual([10 * 2.5 + 5, 20 * 2.5 + 5]);
    // same underlying image-space box in both views
    expect(entry.box).toEqual([10, 20, 30, 40]);
  });

  it("history is append-only and frozen", async () => {
    const client = new ServiceClient("", async () => okResponse(groundBody("m", [1, 2, 3, 4])));
    const session = sessionWithImage();
    await submitQuery(client, session, "opacity", ["m"]);
    const entry = session.history[0];
    expect(Object.isFrozen(entry)).toBe(true);
    expect(() => {
      (entry as { phrase: string }).phrase = "mutated";
    }).toThrow();
  });
});

describe("canSubmit", () => {
  it("is false for an empty phrase", () => {
    const session = sessionWithImage();
    expect(canSubmit("", session, ["m"])).toBe(false);
    expect(canSubmit("   ", session, ["m"])).toBe(false);
    expect(canSubmit("opacity", session, ["m"])).toBe(true);
  });

  it("is false without an image or models", () => {
    const bare = new QuerySession();
    expect(canSubmit("opacity", bare, ["m"])).toBe(false);
    const session = sessionWithImage();
    expect(canSubmit("opacity", session, [])).toBe(false);
  });
});

import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Recorded {
  url: string;
  method?: string;
  body?: string;
}

function clientWith(status: number, payload: unknown) {
  const seen: Recorded[] = [];
  const client = new ApiClient("http://svc", (url, init) => {
    seen.push({ url, method: init?.method, body: init?.body as string | undefined });
    return Promise.resolve(
      new Response(JSON.stringify(payload), {
        status,
        headers: { "Content-Type": "application/json" },
      }),
    );
  });
  return { client, seen };
}

describe("ApiClient", () => {
  it("posts session paths to /session", async () => {
    const { client, seen } = clientWith(200, { session_id: "session-1", pairs: [] });
    await client.startSession("/a/cam.png", "/a/twin.png");
    expect(seen[0].url).toBe("http://svc/session");
    expect(seen[0].method).toBe("POST");
    expect(JSON.parse(seen[0].body!)).toEqual({
      camera_path: "/a/cam.png",
      twin_path: "/a/twin.png",
    });
  });

  it("sends keypoint pairs as [x, y] arrays", async () => {
    const { client, seen } = clientWith(200, { status: "pending", count: 1 });
    const result = await client.addKeypoint(
      { x: 12.5, y: 7.25 },
      { x: 900.125, y: 3 },
      "kp-1",
    );
    expect(JSON.parse(seen[0].body!)).toEqual({
      camera: [12.5, 7.25],
      twin: [900.125, 3],
      label: "kp-1",
    });
    expect(result).toEqual({ status: "pending", count: 1 });
  });

  it("deletes by index", async () => {
    const { client, seen } = clientWith(200, { status: "pending", count: 0 });
    await client.removeKeypoint(4);
    expect(seen[0].url).toBe("http://svc/keypoints/4");
    expect(seen[0].method).toBe("DELETE");
  });

  it("exposes image URLs without fetching", () => {
    const { client, seen } = clientWith(200, {});
    expect(client.imageUrl("camera")).toBe("http://svc/image/camera");
    expect(client.imageUrl("twin")).toBe("http://svc/image/twin");
    expect(seen).toHaveLength(0);
  });

  it("raises ApiError with the service detail on failure", async () => {
    const { client } = clientWith(400, { detail: "camera point (-5, 1) outside image" });
    await expect(client.addKeypoint({ x: -5, y: 1 }, { x: 0, y: 0 }, "kp")).rejects.toThrow(
      ApiError,
    );
    try {
      await client.addKeypoint({ x: -5, y: 1 }, { x: 0, y: 0 }, "kp");
    } catch (err) {
      expect((err as ApiError).status).toBe(400);
      expect((err as ApiError).message).toContain("outside image");
    }
  });

  it("keeps HTTP status text when the error body is not JSON", async () => {
    const client = new ApiClient("", () =>
      Promise.resolve(new Response("<html>boom</html>", { status: 500, statusText: "Server Error" })),
    );
    await expect(client.getSession()).rejects.toMatchObject({
      status: 500,
      message: "Server Error",
    });
  });

  it("propagates network failures as-is", async () => {
    const client = new ApiClient("", () => Promise.reject(new TypeError("fetch failed")));
    await expect(client.getSession()).rejects.toThrow("fetch failed");
  });
});

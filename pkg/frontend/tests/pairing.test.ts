import { describe, expect, it } from "vitest";

import type { ApiClient, DiagnosticsPayload, Point } from "../src/api.js";
import { PairingController } from "../src/pairing.js";

interface Call {
  camera: Point;
  twin: Point;
  label: string;
}

function fakeApi() {
  const calls: Call[] = [];
  const removed: number[] = [];
  let release: (() => void) | null = null;
  const api = {
    addKeypoint(camera: Point, twin: Point, label: string) {
      calls.push({ camera, twin, label });
      return new Promise<DiagnosticsPayload>((resolve) => {
        release = () => resolve({ status: "pending", count: calls.length });
      });
    },
    removeKeypoint(index: number) {
      removed.push(index);
      return Promise.resolve<DiagnosticsPayload>({ status: "pending", count: 0 });
    },
  } as unknown as ApiClient;
  return { api, calls, removed, release: () => release?.() };
}

const tick = () => new Promise((resolve) => setTimeout(resolve, 0));

describe("PairingController", () => {
  it("stages the first click and commits on the opposite panel", async () => {
    const { api, calls, release } = fakeApi();
    const results: DiagnosticsPayload[] = [];
    const controller = new PairingController(api, (d) => results.push(d), () => {});

    controller.click("camera", { x: 10, y: 20 });
    expect(controller.staged).toEqual({ panel: "camera", point: { x: 10, y: 20 } });
    expect(calls).toHaveLength(0);

    controller.click("twin", { x: 3, y: 4 });
    expect(controller.staged).toBeNull();
    expect(calls).toEqual([{ camera: { x: 10, y: 20 }, twin: { x: 3, y: 4 }, label: "kp-1" }]);
    release();
    await tick();
    expect(results).toEqual([{ status: "pending", count: 1 }]);
  });

  it("works in either panel order", () => {
    const { api, calls } = fakeApi();
    const controller = new PairingController(api, () => {}, () => {});
    controller.click("twin", { x: 1, y: 2 });
    controller.click("camera", { x: 5, y: 6 });
    expect(calls[0]).toEqual({ camera: { x: 5, y: 6 }, twin: { x: 1, y: 2 }, label: "kp-1" });
  });

  it("a second click on the same panel replaces the staged half-pair", () => {
    const { api, calls } = fakeApi();
    const controller = new PairingController(api, () => {}, () => {});
    controller.click("camera", { x: 1, y: 1 });
    controller.click("camera", { x: 9, y: 9 });
    expect(calls).toHaveLength(0);
    expect(controller.staged).toEqual({ panel: "camera", point: { x: 9, y: 9 } });
    controller.click("twin", { x: 2, y: 2 });
    expect(calls[0].camera).toEqual({ x: 9, y: 9 });
  });

  it("keeps at most one mutation in flight and preserves click order", async () => {
    const { api, calls, release } = fakeApi();
    const controller = new PairingController(api, () => {}, () => {});

    controller.click("camera", { x: 1, y: 0 });
    controller.click("twin", { x: 1, y: 1 });
    await tick();
    controller.click("camera", { x: 2, y: 0 });
    controller.click("twin", { x: 2, y: 2 });
    controller.click("camera", { x: 3, y: 0 });
    controller.click("twin", { x: 3, y: 3 });
    await tick();

    // Only the first request has been issued; two more are queued.
    expect(calls).toHaveLength(1);
    expect(controller.pendingMutations).toBe(3);

    release();
    await tick();
    expect(calls).toHaveLength(2);
    release();
    await tick();
    expect(calls).toHaveLength(3);
    expect(calls.map((c) => c.label)).toEqual(["kp-1", "kp-2", "kp-3"]);
    expect(calls.map((c) => c.camera.x)).toEqual([1, 2, 3]);
    release();
    await tick();
    expect(controller.pendingMutations).toBe(0);
  });

  it("surfaces service errors through onError and keeps draining", async () => {
    const errors: string[] = [];
    const results: DiagnosticsPayload[] = [];
    let attempt = 0;
    const api = {
      addKeypoint() {
        attempt += 1;
        if (attempt === 1) {
          return Promise.reject(new Error("camera point (0, 0) duplicates pair 1"));
        }
        return Promise.resolve<DiagnosticsPayload>({ status: "pending", count: 1 });
      },
    } as unknown as ApiClient;
    const controller = new PairingController(api, (d) => results.push(d), (m) => errors.push(m));

    controller.click("camera", { x: 0, y: 0 });
    controller.click("twin", { x: 1, y: 1 });
    controller.click("camera", { x: 5, y: 5 });
    controller.click("twin", { x: 6, y: 6 });
    await tick();
    await tick();

    expect(errors).toEqual(["camera point (0, 0) duplicates pair 1"]);
    expect(results).toEqual([{ status: "pending", count: 1 }]);
  });

  it("remove() goes through the same queue", async () => {
    const { api, removed } = fakeApi();
    const controller = new PairingController(api, () => {}, () => {});
    controller.remove(2);
    await tick();
    expect(removed).toEqual([2]);
  });
});

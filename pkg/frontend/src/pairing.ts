/** Click pairing: strict alternation between panels with replace-on-repeat.
 *
 * The first click stages a half-pair on one panel; a click on the other
 * panel commits the pair to the service. Clicking the same panel again
 * replaces the staged half-pair. Mutations are single-flight: while one is
 * in the air, later commits queue in click order.
 */

import type { ApiClient, DiagnosticsPayload, Point } from "./api.js";

export type Panel = "camera" | "twin";

export interface StagedHalf {
  panel: Panel;
  point: Point;
}

export class PairingController {
  staged: StagedHalf | null = null;
  private counter = 0;
  private busy = false;
  private queue: Array<() => Promise<void>> = [];

  constructor(
    private api: ApiClient,
    private onResult: (diagnostics: DiagnosticsPayload) => void,
    private onError: (message: string) => void,
  ) {}

  click(panel: Panel, point: Point): void {
    if (this.staged === null || this.staged.panel === panel) {
      this.staged = { panel, point };
      return;
    }
    const camera = panel === "camera" ? point : this.staged.point;
    const twin = panel === "twin" ? point : this.staged.point;
    this.staged = null;
    this.counter += 1;
    const label = `kp-${this.counter}`;
    this.enqueue(async () => {
      try {
        this.onResult(await this.api.addKeypoint(camera, twin, label));
      } catch (err) {
        this.onError(err instanceof Error ? err.message : String(err));
      }
    });
  }

  remove(index: number): void {
    this.enqueue(async () => {
      try {
        this.onResult(await this.api.removeKeypoint(index));
      } catch (err) {
        this.onError(err instanceof Error ? err.message : String(err));
      }
    });
  }

  clearStaged(): void {
    this.staged = null;
  }

  get pendingMutations(): number {
    return this.queue.length + (this.busy ? 1 : 0);
  }

  private enqueue(task: () => Promise<void>): void {
    this.queue.push(task);
    void this.drain();
  }

  private async drain(): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    while (this.queue.length > 0) {
      const task = this.queue.shift()!;
      await task();
    }
    this.busy = false;
  }
}

/** Screen <-> image coordinate mapping for a zoomable, pannable panel.
 *
 * The transform is the single source of truth for coordinates: clicks go
 * through screenToImage before they are sent anywhere, so what the service
 * receives never depends on the current zoom or pan.
 */

import type { Point } from "./api.js";

export class ViewTransform {
  constructor(
    public readonly scale: number = 1,
    public readonly offsetX: number = 0,
    public readonly offsetY: number = 0,
  ) {}

  imageToScreen(p: Point): Point {
    return { x: p.x * this.scale + this.offsetX, y: p.y * this.scale + this.offsetY };
  }

  screenToImage(p: Point): Point {
    return { x: (p.x - this.offsetX) / this.scale, y: (p.y - this.offsetY) / this.scale };
  }

  /** Zoom by `factor` keeping the image point under `screen` stationary. */
  zoomAt(screen: Point, factor: number): ViewTransform {
    const anchor = this.screenToImage(screen);
    const scale = this.scale * factor;
    return new ViewTransform(
      scale,
      screen.x - anchor.x * scale,
      screen.y - anchor.y * scale,
    );
  }

  pan(dx: number, dy: number): ViewTransform {
    return new ViewTransform(this.scale, this.offsetX + dx, this.offsetY + dy);
  }

  reset(): ViewTransform {
    return new ViewTransform();
  }
}

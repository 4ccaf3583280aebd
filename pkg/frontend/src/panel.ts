/** Pure view-model helpers: what the sidebar and markers display.
 *
 * Kept free of DOM access so the readout logic is testable and the page is
 * a pure function of service state (plus the staged half-pair).
 */

import type { DiagnosticsPayload, SessionPayload } from "./api.js";
import { pairColor } from "./colors.js";
import type { Panel } from "./pairing.js";

export interface ErrorReadout {
  headline: string;
  averagePx: number | null;
  accumulatedPx: number | null;
  warning: boolean;
  detail: string;
}

/** Average error above this many pixels renders the readout in a warning state. */
export const DEFAULT_GATE_PX = 5.0;

export function errorReadout(
  diagnostics: DiagnosticsPayload,
  gatePx: number = DEFAULT_GATE_PX,
): ErrorReadout {
  if (diagnostics.status === "pending") {
    return {
      headline: `need ≥ 4 points (have ${diagnostics.count})`,
      averagePx: null,
      accumulatedPx: null,
      warning: false,
      detail: "",
    };
  }
  if (diagnostics.status === "degenerate") {
    return {
      headline: "degenerate configuration",
      averagePx: null,
      accumulatedPx: null,
      warning: true,
      detail: diagnostics.detail,
    };
  }
  const average = diagnostics.reprojection.average_error_px;
  const accumulated = diagnostics.reprojection.accumulated_error_px;
  return {
    headline: `average error ${formatPx(average)} px`,
    averagePx: average,
    accumulatedPx: accumulated,
    warning: average > gatePx,
    detail: `accumulated ${formatPx(accumulated)} px over ${diagnostics.count} points`,
  };
}

export function formatPx(value: number): string {
  if (value !== 0 && Math.abs(value) < 0.001) {
    return value.toExponential(2);
  }
  return value.toFixed(3);
}

export interface Marker {
  x: number;
  y: number;
  color: string;
  label: string;
  index: number;
}

export function markersFor(session: SessionPayload, panel: Panel): Marker[] {
  return session.pairs.map((pair, index) => {
    const [x, y] = panel === "camera" ? pair.camera : pair.twin;
    return { x, y, color: pairColor(index), label: pair.label, index };
  });
}

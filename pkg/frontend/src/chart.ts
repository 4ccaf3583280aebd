/** Error-vs-keypoint-count chart as a standalone SVG string.
 *
 * Two series over the same x axis: average error in red, accumulated error
 * in blue, each scaled to its own maximum so the elbow stays visible even
 * though the accumulated values dwarf the averages. Every marker carries
 * the exact service value in data attributes, so the rendered chart can be
 * checked against the /error-curve payload without parsing pixels.
 */

import type { CurveEntry } from "./api.js";

const WIDTH = 380;
const HEIGHT = 220;
const MARGIN = { left: 42, right: 42, top: 16, bottom: 30 };

function xScale(ks: number[]): (k: number) => number {
  const min = Math.min(...ks);
  const max = Math.max(...ks);
  const span = max - min || 1;
  const inner = WIDTH - MARGIN.left - MARGIN.right;
  return (k) => MARGIN.left + ((k - min) / span) * inner;
}

function yScale(values: number[]): (v: number) => number {
  const max = Math.max(...values, 1e-12);
  const inner = HEIGHT - MARGIN.top - MARGIN.bottom;
  return (v) => HEIGHT - MARGIN.bottom - (v / max) * inner;
}

function polyline(points: Array<[number, number]>, color: string): string {
  const coords = points.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
  return `<polyline fill="none" stroke="${color}" stroke-width="2" points="${coords}"/>`;
}

function markers(
  entries: CurveEntry[],
  x: (k: number) => number,
  y: (v: number) => number,
  pick: (e: CurveEntry) => number,
  series: string,
  color: string,
): string {
  return entries
    .map((e) => {
      const value = pick(e);
      return (
        `<circle class="curve-point" data-series="${series}" data-k="${e.k}" ` +
        `data-value="${String(value)}" cx="${x(e.k).toFixed(2)}" ` +
        `cy="${y(value).toFixed(2)}" r="3.5" fill="${color}"/>`
      );
    })
    .join("");
}

export function renderErrorChart(entries: CurveEntry[]): string {
  if (entries.length === 0) {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}">` +
      `<text x="${WIDTH / 2}" y="${HEIGHT / 2}" text-anchor="middle" fill="#888">` +
      `need at least 5 points for the error curve</text></svg>`
    );
  }
  const ks = entries.map((e) => e.k);
  const averages = entries.map((e) => e.average_error_px);
  const accumulated = entries.map((e) => e.accumulated_error_px);
  const x = xScale(ks);
  const yAvg = yScale(averages);
  const yAcc = yScale(accumulated);

  const axis =
    `<line x1="${MARGIN.left}" y1="${HEIGHT - MARGIN.bottom}" x2="${WIDTH - MARGIN.right}" ` +
    `y2="${HEIGHT - MARGIN.bottom}" stroke="#444"/>` +
    ks
      .map(
        (k) =>
          `<text x="${x(k).toFixed(2)}" y="${HEIGHT - 10}" text-anchor="middle" ` +
          `font-size="11" fill="#444">${k}</text>`,
      )
      .join("");

  const legend =
    `<text x="${MARGIN.left}" y="12" font-size="11" fill="#c22">average (px)</text>` +
    `<text x="${WIDTH - MARGIN.right}" y="12" font-size="11" fill="#24c" ` +
    `text-anchor="end">accumulated (px)</text>`;

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}">` +
    axis +
    legend +
    polyline(entries.map((e) => [x(e.k), yAvg(e.average_error_px)]), "#c22") +
    polyline(entries.map((e) => [x(e.k), yAcc(e.accumulated_error_px)]), "#24c") +
    markers(entries, x, yAvg, (e) => e.average_error_px, "average", "#c22") +
    markers(entries, x, yAcc, (e) => e.accumulated_error_px, "accumulated", "#24c") +
    `</svg>`
  );
}

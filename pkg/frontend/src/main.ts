/** Page wiring: two zoomable image panels, pairing clicks, live error
 * readout, error-curve chart, and keypoints export. All state shown here is
 * reloaded from GET /session, so a refresh reconstructs the same view.
 */

import { ApiClient, ApiError } from "./api.js";
import type { DiagnosticsPayload, SessionPayload } from "./api.js";
import { renderErrorChart } from "./chart.js";
import { errorReadout, markersFor, DEFAULT_GATE_PX } from "./panel.js";
import { PairingController } from "./pairing.js";
import type { Panel } from "./pairing.js";
import { ViewTransform } from "./transform.js";

const api = new ApiClient("");

const el = (id: string) => document.getElementById(id)!;

const state = {
  session: null as SessionPayload | null,
  transforms: { camera: new ViewTransform(), twin: new ViewTransform() } as Record<
    Panel,
    ViewTransform
  >,
  gatePx: DEFAULT_GATE_PX,
};

const pairing = new PairingController(
  api,
  (diagnostics) => {
    void refreshSession(diagnostics);
  },
  (message) => showBanner(`could not commit pair: ${message}`),
);

function showBanner(message: string, isError = true): void {
  const banner = el("banner");
  banner.textContent = message;
  banner.className = isError ? "banner error" : "banner ok";
  banner.style.display = "flex";
  const retry = document.createElement("button");
  retry.textContent = isError ? "retry" : "dismiss";
  retry.onclick = () => {
    banner.style.display = "none";
    if (isError) void refreshSession();
  };
  banner.appendChild(retry);
}

function hideBanner(): void {
  el("banner").style.display = "none";
}

async function refreshSession(latest?: DiagnosticsPayload): Promise<void> {
  try {
    state.session = await api.getSession();
    hideBanner();
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      state.session = null;
      renderAll();
      return;
    }
    showBanner(`service unreachable: ${err instanceof Error ? err.message : err}`);
    return;
  }
  renderAll(latest ?? state.session.diagnostics);
  await refreshCurve();
}

async function refreshCurve(): Promise<void> {
  const holder = el("chart");
  if (!state.session || state.session.pairs.length < 5) {
    holder.innerHTML = renderErrorChart([]);
    return;
  }
  try {
    const curve = await api.errorCurve();
    holder.innerHTML = renderErrorChart(curve.entries);
  } catch (err) {
    if (!(err instanceof ApiError)) {
      showBanner(`service unreachable: ${err instanceof Error ? err.message : err}`);
    }
  }
}

function renderAll(diagnostics?: DiagnosticsPayload): void {
  const hasSession = state.session !== null;
  el("workspace").style.display = hasSession ? "grid" : "none";
  el("session-form").style.display = hasSession ? "none" : "block";
  if (!state.session) return;

  for (const panel of ["camera", "twin"] as Panel[]) {
    const img = el(`img-${panel}`) as HTMLImageElement;
    const expected = api.imageUrl(panel);
    if (!img.src.endsWith(expected)) img.src = expected;
    applyTransform(panel);
    renderMarkers(panel);
  }
  renderReadout(diagnostics ?? state.session.diagnostics);
  renderPairList();
}

function applyTransform(panel: Panel): void {
  const t = state.transforms[panel];
  const css = `translate(${t.offsetX}px, ${t.offsetY}px) scale(${t.scale})`;
  (el(`img-${panel}`) as HTMLImageElement).style.transform = css;
  (el(`markers-${panel}`) as unknown as SVGElement).style.transform = css;
}

function renderMarkers(panel: Panel): void {
  if (!state.session) return;
  const svg = el(`markers-${panel}`);
  const [w, h] =
    panel === "camera"
      ? state.session.image_size_camera
      : state.session.image_size_twin;
  svg.setAttribute("width", String(w));
  svg.setAttribute("height", String(h));
  const r = 6 / state.transforms[panel].scale;
  const parts = markersFor(state.session, panel).map(
    (m) =>
      `<circle cx="${m.x}" cy="${m.y}" r="${r}" fill="none" stroke="${m.color}" ` +
      `stroke-width="${r / 2.5}"><title>${m.label}</title></circle>`,
  );
  const staged = pairing.staged;
  if (staged && staged.panel === panel) {
    parts.push(
      `<circle cx="${staged.point.x}" cy="${staged.point.y}" r="${r}" ` +
        `fill="none" stroke="#fff" stroke-dasharray="${r / 2} ${r / 2}" ` +
        `stroke-width="${r / 2.5}"/>`,
    );
  }
  svg.innerHTML = parts.join("");
}

function renderReadout(diagnostics: DiagnosticsPayload): void {
  const readout = errorReadout(diagnostics, state.gatePx);
  el("readout-headline").textContent = readout.headline;
  el("readout-detail").textContent = readout.detail;
  el("readout").className = readout.warning ? "readout warning" : "readout";
}

function renderPairList(): void {
  if (!state.session) return;
  const list = el("pair-list");
  list.innerHTML = "";
  markersFor(state.session, "camera").forEach((marker) => {
    const row = document.createElement("li");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = marker.color;
    row.appendChild(swatch);
    row.appendChild(document.createTextNode(` ${marker.label} `));
    const remove = document.createElement("button");
    remove.textContent = "×";
    remove.title = "remove this pair";
    remove.onclick = () => pairing.remove(marker.index);
    row.appendChild(remove);
    list.appendChild(row);
  });
}

function wirePanel(panel: Panel): void {
  const viewport = el(`viewport-${panel}`);
  let dragOrigin: { x: number; y: number } | null = null;
  let dragged = false;

  viewport.addEventListener("pointerdown", (e) => {
    dragOrigin = { x: e.clientX, y: e.clientY };
    dragged = false;
    viewport.setPointerCapture(e.pointerId);
  });
  viewport.addEventListener("pointermove", (e) => {
    if (!dragOrigin) return;
    const dx = e.clientX - dragOrigin.x;
    const dy = e.clientY - dragOrigin.y;
    if (Math.abs(dx) + Math.abs(dy) > 3) dragged = true;
    if (dragged) {
      state.transforms[panel] = state.transforms[panel].pan(dx, dy);
      dragOrigin = { x: e.clientX, y: e.clientY };
      applyTransform(panel);
      renderMarkers(panel);
    }
  });
  viewport.addEventListener("pointerup", (e) => {
    const wasDrag = dragged;
    dragOrigin = null;
    dragged = false;
    if (wasDrag) return;
    const rect = viewport.getBoundingClientRect();
    const screen = { x: e.clientX - rect.left, y: e.clientY - rect.top };
    const image = state.transforms[panel].screenToImage(screen);
    pairing.click(panel, image);
    renderMarkers("camera");
    renderMarkers("twin");
  });
  viewport.addEventListener("wheel", (e) => {
    e.preventDefault();
    const rect = viewport.getBoundingClientRect();
    const screen = { x: e.clientX - rect.left, y: e.clientY - rect.top };
    const factor = e.deltaY < 0 ? 1.25 : 0.8;
    state.transforms[panel] = state.transforms[panel].zoomAt(screen, factor);
    applyTransform(panel);
    renderMarkers(panel);
  });

  el(`zoom-in-${panel}`).onclick = () => {
    const rect = viewport.getBoundingClientRect();
    state.transforms[panel] = state.transforms[panel].zoomAt(
      { x: rect.width / 2, y: rect.height / 2 },
      2,
    );
    applyTransform(panel);
    renderMarkers(panel);
  };
  el(`zoom-out-${panel}`).onclick = () => {
    const rect = viewport.getBoundingClientRect();
    state.transforms[panel] = state.transforms[panel].zoomAt(
      { x: rect.width / 2, y: rect.height / 2 },
      0.5,
    );
    applyTransform(panel);
    renderMarkers(panel);
  };
  el(`zoom-reset-${panel}`).onclick = () => {
    state.transforms[panel] = state.transforms[panel].reset();
    applyTransform(panel);
    renderMarkers(panel);
  };
}

function wireForms(): void {
  el("start-session").onclick = async () => {
    const camera = (el("camera-path") as HTMLInputElement).value.trim();
    const twin = (el("twin-path") as HTMLInputElement).value.trim();
    try {
      await api.startSession(camera, twin);
      state.transforms = { camera: new ViewTransform(), twin: new ViewTransform() };
      pairing.clearStaged();
      await refreshSession();
    } catch (err) {
      showBanner(`could not start session: ${err instanceof Error ? err.message : err}`);
    }
  };

  el("export-btn").onclick = async () => {
    const path = (el("export-path") as HTMLInputElement).value.trim();
    try {
      const result = await api.exportKeypoints(path);
      showBanner(`exported to ${result.path}`, false);
    } catch (err) {
      showBanner(`export failed: ${err instanceof Error ? err.message : err}`);
    }
  };

  const gate = el("gate-px") as HTMLInputElement;
  gate.value = String(state.gatePx);
  gate.onchange = () => {
    const parsed = Number(gate.value);
    if (Number.isFinite(parsed) && parsed > 0) state.gatePx = parsed;
    if (state.session) renderReadout(state.session.diagnostics);
  };
}

wirePanel("camera");
wirePanel("twin");
wireForms();
void refreshSession();

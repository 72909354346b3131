/** DOM wiring: canvas with draggable/scalable overlays, a 3x3 candidate
 * grid per box, and server-rendered composite/heatmap images. */

import { ApiClient } from "./api.js";
import { UISession } from "./session.js";
import type { CandidateInfo } from "./types.js";

const NUDGE_PX = 1;

export function mountApp(root: HTMLElement, baseUrl = ""): UISession {
  const api = new ApiClient(baseUrl);
  const session = new UISession(api);

  root.innerHTML = `
    <div class="toolbar">
      <input type="file" id="ck-file" accept="image/png,image/jpeg">
      <label>people <input type="number" id="ck-n" min="1" max="9" value="1"></label>
      <button id="ck-go" disabled>compose</button>
      <label><input type="checkbox" id="ck-heat"> heatmap</label>
      <span id="ck-status"></span>
    </div>
    <div class="stage" id="ck-stage">
      <img id="ck-canvas" draggable="false" alt="">
      <img id="ck-overlay-heat" draggable="false" alt="" style="display:none">
      <div id="ck-overlays"></div>
    </div>
    <div class="candidates" id="ck-candidates"></div>
  `;

  const fileInput = root.querySelector<HTMLInputElement>("#ck-file")!;
  const nInput = root.querySelector<HTMLInputElement>("#ck-n")!;
  const goButton = root.querySelector<HTMLButtonElement>("#ck-go")!;
  const heatToggle = root.querySelector<HTMLInputElement>("#ck-heat")!;
  const status = root.querySelector<HTMLSpanElement>("#ck-status")!;
  const stage = root.querySelector<HTMLDivElement>("#ck-stage")!;
  const canvas = root.querySelector<HTMLImageElement>("#ck-canvas")!;
  const heatImg = root.querySelector<HTMLImageElement>("#ck-overlay-heat")!;
  const overlayHost = root.querySelector<HTMLDivElement>("#ck-overlays")!;
  const candidateHost = root.querySelector<HTMLDivElement>("#ck-candidates")!;

  let selectedBox = 0;

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    await session.uploadBackground(file);
    goButton.disabled = session.state.sessionId === null;
  });

  goButton.addEventListener("click", () => {
    void session.requestPeople(Number(nInput.value) || 1);
  });

  heatToggle.addEventListener("change", () => {
    heatImg.style.display =
      heatToggle.checked && session.state.heatmapUrl ? "block" : "none";
  });

  document.addEventListener("keydown", (ev) => {
    const moves: Record<string, [number, number]> = {
      ArrowLeft: [-NUDGE_PX, 0],
      ArrowRight: [NUDGE_PX, 0],
      ArrowUp: [0, -NUDGE_PX],
      ArrowDown: [0, NUDGE_PX],
    };
    const move = moves[ev.key];
    if (move && session.state.overlays.length) {
      ev.preventDefault();
      session.refine(selectedBox, { type: "drag", dx: move[0], dy: move[1] });
    }
  });

  session.onChange((state) => {
    status.textContent = state.error ?? (state.busy ? "working…" : "");
    const src = state.compositeUrl ?? state.backgroundUrl;
    if (src && canvas.src !== src) canvas.src = bust(src);
    if (state.heatmapUrl) heatImg.src = bust(state.heatmapUrl);
    renderOverlays(state.overlays, state.width);
    renderCandidates(state.candidates.get(selectedBox) ?? []);
  });

  function renderOverlays(overlays: { index: number; box: number[] }[], width: number) {
    overlayHost.innerHTML = "";
    const scale = width > 0 ? canvas.clientWidth / width || 1 : 1;
    for (const overlay of overlays) {
      const div = document.createElement("div");
      div.className = "overlay" + (overlay.index === selectedBox ? " selected" : "");
      const [x, y, w, h] = overlay.box;
      Object.assign(div.style, {
        position: "absolute",
        left: `${x * scale}px`,
        top: `${y * scale}px`,
        width: `${w * scale}px`,
        height: `${h * scale}px`,
      });
      div.addEventListener("pointerdown", (ev) =>
        beginDrag(ev, overlay.index, scale));
      const handle = document.createElement("div");
      handle.className = "scale-handle";
      handle.addEventListener("pointerdown", (ev) =>
        beginScale(ev, overlay.index, h * scale));
      div.appendChild(handle);
      overlayHost.appendChild(div);
    }
  }

  function beginDrag(ev: PointerEvent, index: number, scale: number) {
    ev.preventDefault();
    selectedBox = index;
    const startX = ev.clientX;
    const startY = ev.clientY;
    const onUp = (up: PointerEvent) => {
      stage.removeEventListener("pointerup", onUp);
      const dx = Math.round((up.clientX - startX) / scale);
      const dy = Math.round((up.clientY - startY) / scale);
      session.refine(index, { type: "drag", dx, dy });
    };
    stage.addEventListener("pointerup", onUp);
  }

  function beginScale(ev: PointerEvent, index: number, pixelHeight: number) {
    ev.preventDefault();
    ev.stopPropagation();
    selectedBox = index;
    const startY = ev.clientY;
    const onUp = (up: PointerEvent) => {
      stage.removeEventListener("pointerup", onUp);
      const factor = Math.max(0.05, (pixelHeight + (up.clientY - startY)) / pixelHeight);
      session.refine(index, { type: "scale", factor });
    };
    stage.addEventListener("pointerup", onUp);
  }

  function renderCandidates(candidates: CandidateInfo[]) {
    candidateHost.innerHTML = "";
    const current = session.state.overlays.find((o) => o.index === selectedBox);
    for (const candidate of candidates.slice(0, 9)) {
      const img = document.createElement("img");
      img.src = api.url(candidate.thumbnail_url);
      img.className =
        "candidate" +
        (current?.segmentId === candidate.segment_id ? " active" : "");
      img.title = candidate.segment_id;
      img.addEventListener("click", () =>
        session.refine(selectedBox, {
          type: "replace",
          segmentId: candidate.segment_id,
        }));
      candidateHost.appendChild(img);
    }
  }

  function bust(url: string): string {
    return `${url}${url.includes("?") ? "&" : "?"}t=${Date.now()}`;
  }

  return session;
}

/** Client-side session state: optimistic overlays, server-authoritative truth.
 *
 * Every mutation goes through a single-flight queue; the overlay geometry is
 * updated optimistically for fluid interaction and then replaced by the
 * server's acknowledged geometry (or rolled back on rejection). The client
 * never composites pixels itself — composite and heatmap renders always come
 * from server URLs.
 */

import { ApiClient, ApiError } from "./api.js";
import type { BoxXYWH, CandidateInfo, ProvenanceRow } from "./types.js";

export interface Overlay {
  index: number;
  box: BoxXYWH;
  segmentId: string | null;
}

export type RefineAction =
  | { type: "replace"; segmentId: string }
  | { type: "drag"; dx: number; dy: number }
  | { type: "scale"; factor: number };

export interface UISessionState {
  sessionId: string | null;
  width: number;
  height: number;
  backgroundUrl: string | null;
  heatmapUrl: string | null;
  compositeUrl: string | null;
  overlays: Overlay[];
  candidates: Map<number, CandidateInfo[]>;
  provenance: ProvenanceRow[];
  busy: boolean;
  error: string | null;
}

type Listener = (state: UISessionState) => void;

export class UISession {
  readonly state: UISessionState = {
    sessionId: null,
    width: 0,
    height: 0,
    backgroundUrl: null,
    heatmapUrl: null,
    compositeUrl: null,
    overlays: [],
    candidates: new Map(),
    provenance: [],
    busy: false,
    error: null,
  };

  /** Last server-acknowledged overlay geometry, for rollback. */
  private acknowledged: Overlay[] = [];
  private queue: Promise<void> = Promise.resolve();
  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const l of this.listeners) l(this.state);
  }

  /** Wait until every queued mutation has been acknowledged or rejected. */
  async idle(): Promise<void> {
    let tail: Promise<void>;
    do {
      tail = this.queue;
      await tail.catch(() => undefined);
    } while (tail !== this.queue);
  }

  async uploadBackground(file: Blob): Promise<void> {
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      const resp = await this.api.createSession(file);
      this.state.sessionId = resp.session_id;
      this.state.width = resp.width;
      this.state.height = resp.height;
      this.state.backgroundUrl = this.api.url(
        `/sessions/${resp.session_id}/images/background.png`,
      );
      this.state.overlays = [];
      this.acknowledged = [];
      this.state.candidates = new Map();
      this.state.provenance = [];
      this.state.compositeUrl = null;
      this.state.heatmapUrl = null;
    } catch (err) {
      this.state.error = describe(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  /** Predict N boxes, fetch 9 candidates each, place the top-1 of each —
   * the automatic composite. */
  async requestPeople(n: number): Promise<void> {
    const sid = this.requireSession();
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      const pred = await this.api.predict(sid, n);
      this.state.heatmapUrl = this.api.url(pred.heatmap_url);
      this.state.overlays = pred.boxes.map((b) => ({
        index: b.index,
        box: [...b.box] as BoxXYWH,
        segmentId: null,
      }));
      this.state.candidates = new Map();
      for (const overlay of this.state.overlays) {
        const resp = await this.api.candidates(sid, overlay.index);
        this.state.candidates.set(overlay.index, resp.candidates);
      }
      this.acknowledged = cloneOverlays(this.state.overlays);
      this.emit();
      for (const overlay of this.state.overlays) {
        const first = this.state.candidates.get(overlay.index)?.[0];
        if (first) this.refine(overlay.index, { type: "replace", segmentId: first.segment_id });
      }
      await this.idle();
    } catch (err) {
      this.state.error = describe(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  /** Queue one mutation; applies the overlay move optimistically.
   *
   * A zero-pixel drag or a scale of exactly 1 is a no-op and sends
   * nothing. A non-positive scale is blocked client-side.
   */
  refine(boxIndex: number, action: RefineAction): void {
    const overlay = this.state.overlays.find((o) => o.index === boxIndex);
    if (!overlay) {
      this.state.error = `no overlay with index ${boxIndex}`;
      this.emit();
      return;
    }
    if (action.type === "drag" && action.dx === 0 && action.dy === 0) return;
    if (action.type === "scale") {
      if (action.factor <= 0) {
        this.state.error = "scale must be positive";
        this.emit();
        return;
      }
      if (action.factor === 1) return;
    }
    if (action.type === "replace" && overlay.segmentId === action.segmentId) return;

    const request = {
      box: boxIndex,
      segment_id:
        action.type === "replace" ? action.segmentId : overlay.segmentId ?? "",
      dx: action.type === "drag" ? action.dx : 0,
      dy: action.type === "drag" ? action.dy : 0,
      scale: action.type === "scale" ? action.factor : 1,
    };
    if (!request.segment_id) {
      this.state.error = "pick a candidate before moving the box";
      this.emit();
      return;
    }

    applyOptimistic(overlay, action);
    this.emit();

    const sid = this.requireSession();
    this.queue = this.queue
      .catch(() => undefined)
      .then(async () => {
        try {
          const resp = await this.api.postPlacement(sid, request);
          overlay.box = [...resp.box.box] as BoxXYWH;
          overlay.segmentId = request.segment_id;
          this.state.compositeUrl = this.api.url(resp.composite_url);
          this.state.provenance = resp.provenance;
          this.acknowledged = cloneOverlays(this.state.overlays);
          this.state.error = null;
        } catch (err) {
          // Server rejected the edit: restore the acknowledged geometry.
          const prev = this.acknowledged.find((o) => o.index === boxIndex);
          if (prev) {
            overlay.box = [...prev.box] as BoxXYWH;
            overlay.segmentId = prev.segmentId;
          }
          this.state.error = describe(err);
        }
        this.emit();
      });
  }

  private requireSession(): string {
    if (!this.state.sessionId) throw new Error("no active session");
    return this.state.sessionId;
  }
}

function applyOptimistic(overlay: Overlay, action: RefineAction): void {
  const [x, y, w, h] = overlay.box;
  if (action.type === "drag") {
    overlay.box = [x + action.dx, y + action.dy, w, h];
  } else if (action.type === "scale") {
    const cx = x + w / 2;
    const cy = y + h / 2;
    const nw = w * action.factor;
    const nh = h * action.factor;
    overlay.box = [cx - nw / 2, cy - nh / 2, nw, nh];
  } else {
    overlay.segmentId = action.segmentId;
  }
}

function cloneOverlays(overlays: Overlay[]): Overlay[] {
  return overlays.map((o) => ({ ...o, box: [...o.box] as BoxXYWH }));
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `server error ${err.status}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

/** Thin typed client over the service's REST endpoints. */

import type {
  CandidatesResponse,
  CreateSessionResponse,
  PlacementResponse,
  PredictResponse,
  SessionInfo,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  async createSession(file: Blob): Promise<CreateSessionResponse> {
    const form = new FormData();
    form.append("file", file, "background.png");
    return this.send("/sessions", { method: "POST", body: form });
  }

  async predict(sessionId: string, nPeople: number): Promise<PredictResponse> {
    return this.send(`/sessions/${sessionId}/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ n_people: nPeople }),
    });
  }

  async candidates(sessionId: string, box: number): Promise<CandidatesResponse> {
    return this.send(`/sessions/${sessionId}/candidates?box=${box}`, {});
  }

  async postPlacement(
    sessionId: string,
    req: { box: number; segment_id: string; dx?: number; dy?: number; scale?: number },
  ): Promise<PlacementResponse> {
    return this.send(`/sessions/${sessionId}/placements`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ dx: 0, dy: 0, scale: 1, ...req }),
    });
  }

  async sessionInfo(sessionId: string): Promise<SessionInfo> {
    return this.send(`/sessions/${sessionId}`, {});
  }

  url(path: string): string {
    return this.baseUrl + path;
  }

  private async send<T>(path: string, init: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { error?: string };
        if (body.error) detail = body.error;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }
}

/**
 * Typed client for the review service HTTP API.
 *
 * Every mutating call resolves to the server's acknowledgment; callers treat
 * that response — not their own prediction — as the new truth. Non-2xx
 * responses become ApiError with the server's message, so the UI can show it.
 */

export type ClassLabel = "background" | "tooth" | "biofilm";

/** Cycle order used by the server's toggle operation. */
export const CLASS_LABELS: readonly ClassLabel[] = ["background", "tooth", "biofilm"];

export interface SessionSummary {
  session_id: string;
  image: string;
}

export interface SessionState {
  session_id: string;
  width: number;
  height: number;
  superpixel_count: number;
  labels: ClassLabel[];
  bqi: number;
  revision: number;
  image_url: string;
  overlay_url: string;
  label_map_url: string;
}

/** Response to toggle and explicit-label edits. */
export interface EditAck {
  superpixel: number;
  old_label: ClassLabel;
  new_label: ClassLabel;
  bqi: number;
  revision: number;
}

export interface UndoAck {
  bqi: number;
  revision: number;
}

/**
 * The slice of the Fetch API the client needs. Structural, so tests and the
 * integration suite can substitute a plain node:http implementation.
 */
export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
  arrayBuffer(): Promise<ArrayBuffer>;
}

export interface RequestInitLike {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type FetchLike = (url: string, init?: RequestInitLike) => Promise<HttpResponse>;

const defaultFetch: FetchLike = (url, init) => fetch(url, init);

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorMessage(res: HttpResponse): Promise<string> {
  try {
    const body = (await res.json()) as Record<string, unknown>;
    if (typeof body.error === "string") return body.error;
    if (body.detail !== undefined) return JSON.stringify(body.detail);
  } catch {
    // non-JSON body; fall through to the status line
  }
  return `request failed with status ${res.status}`;
}

export class ReviewApi {
  constructor(
    readonly base: string = "",
    private readonly fetchFn: FetchLike = defaultFetch,
  ) {}

  /** Absolute (or base-relative) URL for a service path. */
  url(path: string): string {
    return this.base + path;
  }

  private async request(path: string, init?: RequestInitLike): Promise<HttpResponse> {
    const res = await this.fetchFn(this.url(path), init);
    if (!res.ok) {
      throw new ApiError(res.status, await errorMessage(res));
    }
    return res;
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.request(path);
    return (await res.json()) as T;
  }

  private async postJson<T>(path: string, body?: unknown): Promise<T> {
    const res = await this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    });
    return (await res.json()) as T;
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.getJson("/api/sessions");
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.getJson(`/api/sessions/${sessionId}`);
  }

  toggle(sessionId: string, x: number, y: number): Promise<EditAck> {
    return this.postJson(`/api/sessions/${sessionId}/toggle`, { x, y });
  }

  setLabel(sessionId: string, superpixel: number, label: ClassLabel): Promise<EditAck> {
    return this.postJson(`/api/sessions/${sessionId}/label`, { superpixel, label });
  }

  undo(sessionId: string): Promise<UndoAck> {
    return this.postJson(`/api/sessions/${sessionId}/undo`);
  }

  /** Raw bytes of a service asset such as the label-map PNG. */
  async fetchBytes(path: string): Promise<ArrayBuffer> {
    const res = await this.request(path);
    return res.arrayBuffer();
  }
}

import type { GenerateRequest, GenerateResponse, MapPayload } from "./types.js";

export class ApiRequestError extends Error {
  constructor(message: string, readonly status: number, readonly body?: unknown) {
    super(message);
  }
}

/** Thin typed client over the JSON API; base URL injectable for tests. */
export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.baseUrl + path, init);
    let body: unknown = null;
    try {
      body = await res.json();
    } catch {
      // non-JSON error bodies fall through with body = null
    }
    if (!res.ok) {
      const message =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${res.status}`;
      throw new ApiRequestError(message, res.status, body);
    }
    return body as T;
  }

  fetchMap(): Promise<MapPayload> {
    return this.request<MapPayload>("/api/map");
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.request<GenerateResponse>("/api/generate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  health(): Promise<{ status: string }> {
    return this.request<{ status: string }>("/api/health");
  }
}

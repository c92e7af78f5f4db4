import type {
  DetectorConfig,
  FieldErrors,
  PutResult,
  RoiConfig,
  SlackEvent,
  Status,
} from "./types.js";

/** Thin fetch wrapper over the gateway API. The console never computes
 * detection state itself: everything rendered comes back from these calls. */
export class ApiClient {
  constructor(private base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) {
      throw new Error(`${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  private async putJson<T>(path: string, body: unknown): Promise<PutResult<T>> {
    const response = await fetch(this.base + path, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (response.status === 422) {
      const payload = (await response.json()) as { errors: FieldErrors };
      return { ok: false, errors: payload.errors ?? { body: "rejected" } };
    }
    if (!response.ok) {
      return { ok: false, errors: { body: `${path} failed: ${response.status}` } };
    }
    return { ok: true, value: (await response.json()) as T };
  }

  getStatus(): Promise<Status> {
    return this.getJson("/api/status");
  }

  getConfig(): Promise<DetectorConfig> {
    return this.getJson("/api/config");
  }

  putConfig(config: DetectorConfig): Promise<PutResult<DetectorConfig>> {
    return this.putJson("/api/config", config);
  }

  getRoi(): Promise<RoiConfig> {
    return this.getJson("/api/roi");
  }

  putRoi(roi: RoiConfig): Promise<PutResult<RoiConfig>> {
    return this.putJson("/api/roi", roi);
  }

  getEvents(): Promise<SlackEvent[]> {
    return this.getJson("/api/events");
  }

  async mark(frame: number, label: string): Promise<void> {
    const params = new URLSearchParams({ frame: String(frame), label });
    const response = await fetch(`${this.base}/api/mark?${params}`, { method: "POST" });
    if (!response.ok) {
      throw new Error(`mark failed: ${response.status}`);
    }
  }

  frameUrl(index: number, overlay: boolean): string {
    return `${this.base}/api/frame/${index}?overlay=${overlay}`;
  }

  streamUrl(): string {
    return `${this.base}/api/stream`;
  }
}

/** Wire types mirroring the gateway's JSON bodies. */

export interface StreamRecord {
  frame: number;
  count: number;
  score: number;
  event_open: boolean;
}

export interface Status {
  frame: number;
  detector: string;
  events_open: number;
  last_score: number | null;
}

export interface SlackEvent {
  id: number;
  start_frame: number;
  end_frame: number;
  peak_score: number;
  peak_frame: number;
  start_ms: number;
  end_ms: number;
}

export interface RoiPolygonConfig {
  name: string;
  vertices: [number, number][];
}

export interface RoiConfig {
  source_id: string;
  polygons: RoiPolygonConfig[];
}

/** Detector config: the console edits a handful of fields and passes the
 * rest through untouched; the server is the validator. */
export interface DetectorConfig {
  detector: string;
  tau: number;
  avg_window: number;
  score_on: number;
  score_off: number;
  min_event_frames: number;
  [key: string]: unknown;
}

export type FieldErrors = Record<string, string>;

export type PutResult<T> =
  | { ok: true; value: T }
  | { ok: false; errors: FieldErrors };

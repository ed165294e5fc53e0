export interface GroundResponse {
  box_xyxy: [number, number, number, number];
  model_id: string;
  stage: string;
  latency_ms: number;
}

export interface ModelInfo {
  model_id: string;
  stage: string;
  config: Record<string, unknown>;
}

export interface HistoryEntry {
  requestId: number;
  phrase: string;
  modelId: string;
  stage: string;
  /** Source-frame pixel corners exactly as returned by the service. */
  box: [number, number, number, number];
  timestamp: number;
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface Overlay {
  rect: Rect;
  color: string;
  label: string;
  entry: HistoryEntry;
}

export interface QueryError {
  modelId: string;
  message: string;
}

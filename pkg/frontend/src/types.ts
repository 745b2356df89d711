// Wire types for the annotation service /v1 API. Field names follow the
// JSON exactly; nothing here is renamed or reshaped.

export interface WireBox {
  track_id: number | string | null;
  category: string;
  center: [number, number, number];
  dimensions: [number, number, number];
  yaw: number;
  score: number | null;
  attributes: Record<string, unknown>;
}

export interface SequenceInfo {
  id: string;
  frames: number;
  revision: number;
  sensors: string[];
}

export interface CloudInfo {
  url: string;
  points: number;
  chunks: number;
  chunk_points: number;
}

export interface ImageRef {
  camera: string;
  url: string;
}

export interface FramePayload {
  sequence: string;
  index: number;
  timestamp: number | null;
  revision: number;
  labels: WireBox[];
  clouds: Record<string, CloudInfo>;
  images: ImageRef[];
  calibrations: Record<string, unknown>;
}

export interface SaveOk {
  ok: true;
  revision: number;
}

/** Stale base revision: the caller must rebase onto the server state. */
export interface SaveConflict {
  ok: false;
  status: 409;
  detail: string;
  latestRevision: number;
  serverLabels: WireBox[];
}

export type SaveResult = SaveOk | SaveConflict;

export interface InterpolatedEntry {
  frame: number;
  box: WireBox;
}

export interface InterpolateResponse {
  track_id: number | string;
  boxes: InterpolatedEntry[];
}

export interface AutofitResponse {
  box: WireBox;
  points_used: number;
  sensor: string;
}

export interface CopyNextResponse {
  revision: number;
  copied: number;
  frame: number;
}

export type Pixel = [number, number] | null;

export interface ProjectedEdge {
  a: Pixel;
  b: Pixel;
  clipped: boolean;
}

export interface ProjectResponse {
  camera: string;
  track_id: number | string | null;
  behind_camera: boolean;
  corners: Pixel[];
  in_front: boolean[];
  edges: ProjectedEdge[];
}

export interface DecodedCloud {
  /** xyz triples, 3 * count long. */
  positions: Float32Array;
  intensity: Float32Array | null;
  count: number;
}

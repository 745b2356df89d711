import type { DecodedCloud, FramePayload, ProjectResponse, WireBox } from './types.js';

export type ViewMode = 'perspective' | 'orthographic';

/**
 * Wireframe edge order shared with the service: bottom ring, top ring,
 * then verticals. Corner 0 is (+l/2, +w/2, -h/2) in the box frame and
 * the bottom face winds (+,+), (+,-), (-,-), (-,+).
 */
export const BOX_EDGES: readonly [number, number][] = [
  [0, 1], [1, 2], [2, 3], [3, 0],
  [4, 5], [5, 6], [6, 7], [7, 4],
  [0, 4], [1, 5], [2, 6], [3, 7],
];

const PALETTE = [
  '#4e79a7', '#f28e2b', '#e15759', '#76b7b2', '#59a245',
  '#edc948', '#b07aa1', '#ff9da7', '#9c755f', '#bab0ac',
];

/** Stable category color: same name, same color, every session. */
export function categoryColor(category: string): string {
  let hash = 0;
  for (let i = 0; i < category.length; i++) {
    hash = (hash * 31 + category.charCodeAt(i)) >>> 0;
  }
  return PALETTE[hash % PALETTE.length]!;
}

/**
 * Local corner positions for drawing the 3D wireframe. Render-only:
 * persisted numbers never come from here.
 */
export function boxCorners(box: WireBox): [number, number, number][] {
  const [l, w, h] = box.dimensions;
  const cos = Math.cos(box.yaw);
  const sin = Math.sin(box.yaw);
  const signs: [number, number][] = [
    [1, 1], [1, -1], [-1, -1], [-1, 1],
  ];
  const corners: [number, number, number][] = [];
  for (const zs of [-1, 1]) {
    for (const [xs, ys] of signs) {
      const bx = (xs * l) / 2;
      const by = (ys * w) / 2;
      corners.push([
        box.center[0] + bx * cos - by * sin,
        box.center[1] + bx * sin + by * cos,
        box.center[2] + (zs * h) / 2,
      ]);
    }
  }
  return corners;
}

export interface CloudPlan {
  lod: number;
  expectedPoints: number;
  degraded: boolean;
}

/**
 * Pick the level of detail that fits the point budget. Degradation is
 * a flagged state, never a silent drop, and it only ever applies to
 * points; labels are not subject to any budget.
 */
export function planCloud(totalPoints: number, budget: number): CloudPlan {
  if (!(budget > 0)) throw new Error(`point budget must be positive, got ${budget}`);
  if (totalPoints <= budget) {
    return { lod: 1.0, expectedPoints: totalPoints, degraded: false };
  }
  const lod = budget / totalPoints;
  return { lod, expectedPoints: Math.round(totalPoints * lod), degraded: true };
}

export interface PreparedFrame {
  boxCount: number;
  boxes: readonly WireBox[];
  colors: string[];
  positions: Float32Array;
  pointCount: number;
  degraded: boolean;
  notices: string[];
}

/**
 * Assemble everything one frame draw needs. The box count badge always
 * equals the label count; a capped cloud adds a visible notice.
 */
export function prepareFrame(
  payload: FramePayload,
  boxes: readonly WireBox[],
  clouds: DecodedCloud[],
  totalAvailable: number,
): PreparedFrame {
  const pointCount = clouds.reduce((n, c) => n + c.count, 0);
  const positions = new Float32Array(pointCount * 3);
  let at = 0;
  for (const cloud of clouds) {
    positions.set(cloud.positions, at * 3);
    at += cloud.count;
  }
  const degraded = pointCount < totalAvailable;
  const notices = degraded
    ? [`showing ${pointCount} of ${totalAvailable} points`]
    : [];
  return {
    boxCount: boxes.length,
    boxes,
    colors: boxes.map((b) => categoryColor(b.category)),
    positions,
    pointCount,
    degraded,
    notices,
  };
}

export interface OverlaySegment {
  a: [number, number];
  b: [number, number];
  clipped: boolean;
}

export interface Overlay {
  camera: string;
  trackId: number | string | null;
  behindCamera: boolean;
  segments: OverlaySegment[];
  /** Edges the service returned with an off-screen endpoint, not drawn. */
  droppedEdges: number;
}

/**
 * Turn a service projection response into drawable 2D segments. Pixel
 * values pass through exactly as received; edges with a missing
 * endpoint are counted, not drawn, and a box fully behind the camera
 * yields no segments at all.
 */
export function overlayFromProjection(response: ProjectResponse): Overlay {
  const segments: OverlaySegment[] = [];
  let dropped = 0;
  if (!response.behind_camera) {
    for (const edge of response.edges) {
      if (edge.a !== null && edge.b !== null) {
        segments.push({ a: edge.a, b: edge.b, clipped: edge.clipped });
      } else {
        dropped += 1;
      }
    }
  }
  return {
    camera: response.camera,
    trackId: response.track_id,
    behindCamera: response.behind_camera,
    segments,
    droppedEdges: dropped,
  };
}

/**
 * View mode lives here, apart from the editing state, so switching
 * projections can never disturb the selection.
 */
export class ViewerState {
  mode: ViewMode = 'perspective';
  pointBudget: number;

  constructor(pointBudget = 500_000) {
    this.pointBudget = pointBudget;
  }

  toggleMode(): ViewMode {
    this.mode = this.mode === 'perspective' ? 'orthographic' : 'perspective';
    return this.mode;
  }
}

import type { ApiClient } from './api.js';
import type {
  FramePayload,
  InterpolateResponse,
  SaveResult,
  WireBox,
} from './types.js';

export type ToolMode = 'navigate' | 'create' | 'translate' | 'rotate' | 'scale';

export const TOOL_MODES: readonly ToolMode[] = [
  'navigate',
  'create',
  'translate',
  'rotate',
  'scale',
];

export interface ConflictInfo {
  detail: string;
  latestRevision: number;
  serverLabels: WireBox[];
}

const TWO_PI = 2 * Math.PI;

function wrapYaw(yaw: number): number {
  if (yaw >= -Math.PI && yaw < Math.PI) return yaw;
  const shifted = ((((yaw + Math.PI) % TWO_PI) + TWO_PI) % TWO_PI) - Math.PI;
  return shifted;
}

function clone<T>(value: T): T {
  return structuredClone(value);
}

/**
 * Annotation session state for one loaded frame.
 *
 * Edits apply to a working copy of the labels; the committed copy is
 * whatever the server last acknowledged. "Pending" means the two
 * differ. Every persisted number comes from user input or a service
 * response; nothing here invents geometry.
 */
export class EditorState {
  sequenceId: string | null = null;
  frameIndex = 0;
  baseRevision = 0;
  mode: ToolMode = 'navigate';
  selectedId: number | string | null = null;
  conflict: ConflictInfo | null = null;

  /** Maximum number of edits undo can walk back. */
  readonly undoDepth = 50;

  private labels: WireBox[] = [];
  private committed: WireBox[] = [];
  private undoStack: WireBox[][] = [];
  // Service interpolation results per frame, held verbatim for display
  // until accepted into the working labels or discarded.
  private previews = new Map<number, WireBox[]>();

  loadFrame(payload: FramePayload): void {
    this.sequenceId = payload.sequence;
    this.frameIndex = payload.index;
    this.baseRevision = payload.revision;
    this.labels = clone(payload.labels);
    this.committed = clone(payload.labels);
    this.undoStack = [];
    this.conflict = null;
    if (this.selectedId !== null && !this.findBox(this.selectedId)) {
      this.selectedId = null;
    }
  }

  get hasPending(): boolean {
    return (
      JSON.stringify(this.labels) !== JSON.stringify(this.committed) ||
      this.previews.size > 0
    );
  }

  /** Working labels for the loaded frame, edits applied. */
  get currentLabels(): readonly WireBox[] {
    return this.labels;
  }

  /**
   * Boxes to draw for a frame. An interpolation preview replaces the
   * stored box of the same track and appends the rest, numbers exactly
   * as the service sent them.
   */
  displayedBoxes(frame: number = this.frameIndex): readonly WireBox[] {
    const base = frame === this.frameIndex ? this.labels : [];
    const preview = this.previews.get(frame);
    if (!preview) return base;
    const previewIds = new Set(preview.map((b) => b.track_id));
    return [...base.filter((b) => !previewIds.has(b.track_id)), ...preview];
  }

  setMode(mode: ToolMode): void {
    this.mode = mode;
  }

  select(trackId: number | string | null): void {
    if (trackId !== null && !this.findBox(trackId)) return;
    this.selectedId = trackId;
  }

  /** Move selection to the next (or previous) box, wrapping around. */
  cycleSelection(direction: 1 | -1 = 1): void {
    if (this.labels.length === 0) return;
    const ids = this.labels.map((b) => b.track_id);
    const at = ids.indexOf(this.selectedId as never);
    const next = at < 0 ? 0 : (at + direction + ids.length) % ids.length;
    this.selectedId = ids[next] ?? null;
  }

  get selectedBox(): WireBox | null {
    return this.selectedId === null ? null : this.findBox(this.selectedId);
  }

  translateSelected(dx: number, dy: number, dz: number): boolean {
    const box = this.selectedBox;
    if (!box) return false;
    this.beginEdit();
    const target = this.findBox(this.selectedId!)!;
    target.center = [target.center[0] + dx, target.center[1] + dy, target.center[2] + dz];
    return true;
  }

  rotateSelected(dyaw: number): boolean {
    const box = this.selectedBox;
    if (!box) return false;
    this.beginEdit();
    const target = this.findBox(this.selectedId!)!;
    target.yaw = wrapYaw(target.yaw + dyaw);
    return true;
  }

  /** Uniform scale; factors that would not keep dimensions positive are blocked. */
  scaleSelected(factor: number): boolean {
    const box = this.selectedBox;
    if (!box || !(factor > 0) || !Number.isFinite(factor)) return false;
    this.beginEdit();
    const target = this.findBox(this.selectedId!)!;
    target.dimensions = [
      target.dimensions[0] * factor,
      target.dimensions[1] * factor,
      target.dimensions[2] * factor,
    ];
    return true;
  }

  setSelectedDimensions(dims: [number, number, number]): boolean {
    const box = this.selectedBox;
    if (!box || dims.some((d) => !(d > 0) || !Number.isFinite(d))) return false;
    this.beginEdit();
    const target = this.findBox(this.selectedId!)!;
    target.dimensions = [...dims];
    return true;
  }

  /** Walk one edit back. Returns false when there is nothing to undo. */
  undo(): boolean {
    const snapshot = this.undoStack.pop();
    if (!snapshot) return false;
    this.labels = snapshot;
    return true;
  }

  /** Store a service interpolation result for display, untouched. */
  applyInterpolationPreview(response: InterpolateResponse): void {
    for (const entry of response.boxes) {
      const existing = this.previews.get(entry.frame) ?? [];
      this.previews.set(entry.frame, [
        ...existing.filter((b) => b.track_id !== entry.box.track_id),
        entry.box,
      ]);
    }
  }

  /** Fold the loaded frame's preview into the working labels. */
  acceptPreview(): boolean {
    const preview = this.previews.get(this.frameIndex);
    if (!preview) return false;
    this.beginEdit();
    const previewIds = new Set(preview.map((b) => b.track_id));
    this.labels = [
      ...this.labels.filter((b) => !previewIds.has(b.track_id)),
      ...clone(preview),
    ];
    this.previews.delete(this.frameIndex);
    return true;
  }

  discardPreviews(): void {
    this.previews.clear();
  }

  /** Throw away pending edits; the working copy snaps back to committed. */
  discard(): void {
    this.labels = clone(this.committed);
    this.undoStack = [];
    this.previews.clear();
  }

  /**
   * PUT the working labels under the base revision. On success pending
   * is cleared; on a stale base the conflict is surfaced for the
   * merge-or-reload prompt and nothing local is lost.
   */
  async save(client: ApiClient, author = 'annotator'): Promise<SaveResult> {
    if (this.sequenceId === null) {
      throw new Error('no frame loaded');
    }
    const result = await client.saveLabels(this.sequenceId, this.frameIndex, {
      base_revision: this.baseRevision,
      boxes: clone(this.labels),
      author,
    });
    if (result.ok) {
      this.baseRevision = result.revision;
      this.committed = clone(this.labels);
      this.previews.delete(this.frameIndex);
      this.conflict = null;
    } else {
      this.conflict = {
        detail: result.detail,
        latestRevision: result.latestRevision,
        serverLabels: result.serverLabels,
      };
    }
    return result;
  }

  /** Resolve a conflict by adopting the server state, dropping local edits. */
  reloadFromConflict(): boolean {
    if (!this.conflict) return false;
    this.baseRevision = this.conflict.latestRevision;
    this.labels = clone(this.conflict.serverLabels);
    this.committed = clone(this.conflict.serverLabels);
    this.undoStack = [];
    this.conflict = null;
    return true;
  }

  /** Resolve a conflict by replaying local edits onto the latest revision. */
  rebaseOntoLatest(): boolean {
    if (!this.conflict) return false;
    this.baseRevision = this.conflict.latestRevision;
    this.conflict = null;
    return true;
  }

  private findBox(trackId: number | string): WireBox | null {
    return this.labels.find((b) => b.track_id === trackId) ?? null;
  }

  private beginEdit(): void {
    this.undoStack.push(clone(this.labels));
    if (this.undoStack.length > this.undoDepth) {
      this.undoStack.shift();
    }
  }
}

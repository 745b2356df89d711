import { beforeAll, describe, expect, inject, test } from 'vitest';
import { ApiClient } from '../src/api.js';
import { EditorState, TOOL_MODES } from '../src/editor.js';
import { makeBox, makePayload } from './helpers.js';

describe('selection', () => {
  test('at most one box is selected and unknown ids are ignored', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0]), makeBox(2, [5, 0, 0])]));
    editor.select(1);
    expect(editor.selectedId).toBe(1);
    editor.select(2);
    expect(editor.selectedId).toBe(2);
    editor.select(99);
    expect(editor.selectedId).toBe(2);
    editor.select(null);
    expect(editor.selectedId).toBeNull();
  });

  test('cycling wraps in both directions', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0]), makeBox(2, [5, 0, 0]), makeBox(3, [9, 0, 0])]));
    editor.cycleSelection(1);
    expect(editor.selectedId).toBe(1);
    editor.cycleSelection(1);
    editor.cycleSelection(1);
    expect(editor.selectedId).toBe(3);
    editor.cycleSelection(1);
    expect(editor.selectedId).toBe(1);
    editor.cycleSelection(-1);
    expect(editor.selectedId).toBe(3);
  });

  test('loading a frame without the selected track drops the selection', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(7, [0, 0, 0])]));
    editor.select(7);
    editor.loadFrame(makePayload([makeBox(8, [0, 0, 0])]));
    expect(editor.selectedId).toBeNull();
    editor.select(8);
    editor.loadFrame(makePayload([makeBox(8, [1, 1, 0])]));
    expect(editor.selectedId).toBe(8);
  });
});

describe('edits', () => {
  test('edits require a selection', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0])]));
    expect(editor.translateSelected(1, 0, 0)).toBe(false);
    expect(editor.rotateSelected(0.1)).toBe(false);
    expect(editor.scaleSelected(1.1)).toBe(false);
    expect(editor.hasPending).toBe(false);
  });

  test('rotation stays within [-pi, pi)', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0], { yaw: 3.0 })]));
    editor.select(1);
    editor.rotateSelected(0.5);
    const wrapped = editor.selectedBox!.yaw;
    expect(wrapped).toBeGreaterThanOrEqual(-Math.PI);
    expect(wrapped).toBeLessThan(Math.PI);
    expect(wrapped).toBeCloseTo(3.5 - 2 * Math.PI, 12);
    for (let i = 0; i < 40; i++) editor.rotateSelected(-1.0);
    const again = editor.selectedBox!.yaw;
    expect(again).toBeGreaterThanOrEqual(-Math.PI);
    expect(again).toBeLessThan(Math.PI);
  });

  test('degenerate scales and dimensions are blocked at input', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0])]));
    editor.select(1);
    const dims = [...editor.selectedBox!.dimensions];
    expect(editor.scaleSelected(0)).toBe(false);
    expect(editor.scaleSelected(-1.05)).toBe(false);
    expect(editor.scaleSelected(Number.NaN)).toBe(false);
    expect(editor.scaleSelected(Number.POSITIVE_INFINITY)).toBe(false);
    expect(editor.setSelectedDimensions([4, 0, 2])).toBe(false);
    expect(editor.setSelectedDimensions([4, -1, 2])).toBe(false);
    expect(editor.selectedBox!.dimensions).toEqual(dims);
    expect(editor.hasPending).toBe(false);
  });

  test('mode switching never touches the labels', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0])]));
    const before = JSON.stringify(editor.currentLabels);
    for (const mode of TOOL_MODES) {
      editor.setMode(mode);
      expect(editor.mode).toBe(mode);
    }
    expect(JSON.stringify(editor.currentLabels)).toBe(before);
  });
});

describe('undo stack', () => {
  test('undo depth covers at least 20 edits and caps at undoDepth', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0])]));
    editor.select(1);
    expect(editor.undoDepth).toBeGreaterThanOrEqual(20);

    for (let i = 0; i < editor.undoDepth + 5; i++) {
      editor.translateSelected(1, 0, 0);
    }
    expect(editor.selectedBox!.center[0]).toBe(editor.undoDepth + 5);
    let undone = 0;
    while (editor.undo()) undone++;
    expect(undone).toBe(editor.undoDepth);
    // The five oldest snapshots fell off the capped stack.
    expect(editor.selectedBox!.center[0]).toBe(5);
  });

  test('discard snaps back to the committed state and clears previews', () => {
    const editor = new EditorState();
    const payload = makePayload([makeBox(1, [0, 0, 0]), makeBox(2, [5, 0, 0])]);
    editor.loadFrame(payload);
    editor.select(1);
    editor.translateSelected(3, 0, 0);
    editor.applyInterpolationPreview({
      track_id: 2,
      boxes: [{ frame: 0, box: makeBox(2, [6, 0, 0]) }],
    });
    expect(editor.hasPending).toBe(true);
    editor.discard();
    expect(editor.hasPending).toBe(false);
    expect(editor.currentLabels).toEqual(payload.labels);
    expect(editor.displayedBoxes()).toEqual(payload.labels);
    expect(editor.undo()).toBe(false);
  });

  test('accepting a preview is itself undoable', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0])]));
    const before = JSON.stringify(editor.currentLabels);
    editor.applyInterpolationPreview({
      track_id: 1,
      boxes: [{ frame: 0, box: makeBox(1, [4, 4, 0]) }],
    });
    expect(editor.acceptPreview()).toBe(true);
    expect(editor.currentLabels[0]!.center).toEqual([4, 4, 0]);
    expect(editor.undo()).toBe(true);
    expect(JSON.stringify(editor.currentLabels)).toBe(before);
  });

  test('a preview replaces its own track in the displayed set only', () => {
    const editor = new EditorState();
    editor.loadFrame(makePayload([makeBox(1, [0, 0, 0]), makeBox(2, [5, 0, 0])]));
    editor.applyInterpolationPreview({
      track_id: 1,
      boxes: [
        { frame: 0, box: makeBox(1, [1, 1, 0]) },
        { frame: 1, box: makeBox(1, [2, 2, 0]) },
      ],
    });
    const shown = editor.displayedBoxes(0);
    expect(shown).toHaveLength(2);
    expect(shown.find((b) => b.track_id === 1)!.center).toEqual([1, 1, 0]);
    // The working labels are untouched until the preview is accepted.
    expect(editor.currentLabels.find((b) => b.track_id === 1)!.center).toEqual([0, 0, 0]);
    expect(editor.displayedBoxes(1)).toHaveLength(1);
    editor.discardPreviews();
    expect(editor.displayedBoxes(1)).toHaveLength(0);
  });
});

describe('save flow against the service', () => {
  let client: ApiClient;

  beforeAll(() => {
    client = new ApiClient(inject('baseUrl'));
  });

  test('a clean save commits, bumps the base revision, and clears pending', async () => {
    const editor = new EditorState();
    editor.loadFrame(await client.getFrame('scene-edit', 0));
    editor.select(editor.currentLabels[0]!.track_id!);
    editor.translateSelected(0.5, 0, 0);
    expect(editor.hasPending).toBe(true);

    const result = await editor.save(client, 'alice');
    expect(result.ok).toBe(true);
    if (result.ok) {
      expect(editor.baseRevision).toBe(result.revision);
    }
    expect(editor.hasPending).toBe(false);
    expect(editor.conflict).toBeNull();

    const reread = await client.getFrame('scene-edit', 0);
    expect(reread.revision).toBe(editor.baseRevision);
    expect(reread.labels).toEqual(editor.currentLabels);
  });

  test('a stale save surfaces the conflict and loses nothing local', async () => {
    const editor = new EditorState();
    editor.loadFrame(await client.getFrame('scene-edit', 1));
    editor.select(editor.currentLabels[0]!.track_id!);

    // Another annotator commits first.
    const other = new EditorState();
    other.loadFrame(await client.getFrame('scene-edit', 1));
    other.select(other.currentLabels[0]!.track_id!);
    other.rotateSelected(0.25);
    const otherResult = await other.save(client, 'bob');
    expect(otherResult.ok).toBe(true);

    editor.translateSelected(2, 0, 0);
    const mine = structuredClone(editor.currentLabels);
    const result = await editor.save(client, 'alice');
    expect(result.ok).toBe(false);
    expect(editor.conflict).not.toBeNull();
    expect(editor.conflict!.latestRevision).toBe(other.baseRevision);
    expect(editor.currentLabels).toEqual(mine);
    expect(editor.hasPending).toBe(true);

    // Reload resolution adopts the server state wholesale.
    expect(editor.reloadFromConflict()).toBe(true);
    expect(editor.baseRevision).toBe(other.baseRevision);
    expect(editor.currentLabels).toEqual(other.currentLabels);
    expect(editor.hasPending).toBe(false);
  });

  test('rebase resolution replays local edits onto the latest revision', async () => {
    const editor = new EditorState();
    editor.loadFrame(await client.getFrame('scene-edit', 2));
    editor.select(editor.currentLabels[0]!.track_id!);

    const other = new EditorState();
    other.loadFrame(await client.getFrame('scene-edit', 2));
    other.select(other.currentLabels[0]!.track_id!);
    other.translateSelected(0, 1, 0);
    expect((await other.save(client, 'bob')).ok).toBe(true);

    editor.translateSelected(0, -1, 0);
    const mine = structuredClone(editor.currentLabels);
    expect((await editor.save(client, 'alice')).ok).toBe(false);

    expect(editor.rebaseOntoLatest()).toBe(true);
    expect(editor.conflict).toBeNull();
    expect(editor.currentLabels).toEqual(mine);

    const retry = await editor.save(client, 'alice');
    expect(retry.ok).toBe(true);
    const reread = await client.getFrame('scene-edit', 2);
    expect(reread.labels).toEqual(mine);
  });

  test('save without a loaded frame is an error', async () => {
    const editor = new EditorState();
    await expect(editor.save(client)).rejects.toThrow(/no frame loaded/);
  });
});

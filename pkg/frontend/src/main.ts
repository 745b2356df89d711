import { ApiClient } from './api.js';
import { EditorState } from './editor.js';
import { bindKeyboard } from './keyboard.js';
import {
  BOX_EDGES,
  ViewerState,
  boxCorners,
  categoryColor,
  planCloud,
  prepareFrame,
} from './viewer.js';
import type { PreparedFrame } from './viewer.js';

/**
 * Browser entry point: a BEV canvas with keyboard-driven editing.
 * The module is inert outside a document (tests import the library
 * modules directly).
 */

interface App {
  client: ApiClient;
  editor: EditorState;
  viewer: ViewerState;
  canvas: HTMLCanvasElement;
  status: HTMLElement;
  prepared: PreparedFrame | null;
  metersPerPixel: number;
}

function drawFrame(app: App): void {
  const ctx = app.canvas.getContext('2d');
  if (!ctx || !app.prepared) return;
  const { width, height } = app.canvas;
  ctx.fillStyle = '#14161a';
  ctx.fillRect(0, 0, width, height);

  // BEV: world x up, world y left, origin mid-canvas.
  const toScreen = (x: number, y: number): [number, number] => [
    width / 2 - y / app.metersPerPixel,
    height / 2 - x / app.metersPerPixel,
  ];

  ctx.fillStyle = '#8fa3b8';
  const positions = app.prepared.positions;
  for (let i = 0; i < positions.length; i += 3) {
    const [sx, sy] = toScreen(positions[i]!, positions[i + 1]!);
    if (sx >= 0 && sx < width && sy >= 0 && sy < height) {
      ctx.fillRect(sx, sy, 1, 1);
    }
  }

  app.prepared.boxes.forEach((box, i) => {
    const selected = box.track_id === app.editor.selectedId;
    ctx.strokeStyle = selected ? '#ffffff' : app.prepared!.colors[i]!;
    ctx.lineWidth = selected ? 2 : 1;
    const corners = boxCorners(box);
    ctx.beginPath();
    for (const [a, b] of BOX_EDGES.slice(0, 4)) {
      const [ax, ay] = toScreen(corners[a]![0], corners[a]![1]);
      const [bx, by] = toScreen(corners[b]![0], corners[b]![1]);
      ctx.moveTo(ax, ay);
      ctx.lineTo(bx, by);
    }
    ctx.stroke();
  });

  const flags = [
    `frame ${app.editor.frameIndex}`,
    `rev ${app.editor.baseRevision}`,
    `${app.prepared.boxCount} boxes`,
    app.editor.mode,
  ];
  if (app.editor.hasPending) flags.push('unsaved');
  if (app.editor.conflict) flags.push('CONFLICT');
  flags.push(...app.prepared.notices);
  app.status.textContent = flags.join(' | ');
}

async function loadFrame(app: App, index: number): Promise<void> {
  const sequences = await app.client.listSequences();
  const seq = sequences[0];
  if (!seq) {
    app.status.textContent = 'no sequences served';
    return;
  }
  const payload = await app.client.getFrame(seq.id, index);
  app.editor.loadFrame(payload);

  const clouds = [];
  let totalAvailable = 0;
  for (const [sensor, info] of Object.entries(payload.clouds)) {
    totalAvailable += info.points;
    const plan = planCloud(info.points, app.viewer.pointBudget);
    clouds.push(await app.client.fetchCloud(seq.id, index, sensor, plan.lod));
  }
  app.prepared = prepareFrame(payload, app.editor.displayedBoxes(), clouds, totalAvailable);
  drawFrame(app);
}

function refresh(app: App): void {
  if (app.prepared) {
    app.prepared = {
      ...app.prepared,
      boxes: app.editor.displayedBoxes(),
      boxCount: app.editor.displayedBoxes().length,
      colors: app.editor.displayedBoxes().map((b) => categoryColor(b.category)),
    };
  }
  drawFrame(app);
}

async function boot(): Promise<void> {
  const canvas = document.getElementById('bev') as HTMLCanvasElement | null;
  const status = document.getElementById('status');
  if (!canvas || !status) throw new Error('missing #bev canvas or #status element');

  const app: App = {
    client: new ApiClient(''),
    editor: new EditorState(),
    viewer: new ViewerState(),
    canvas,
    status,
    prepared: null,
    metersPerPixel: 0.2,
  };

  const handleKey = bindKeyboard(app.editor);
  window.addEventListener('keydown', (event) => {
    if (event.key === 's' && (event.ctrlKey || event.metaKey)) {
      event.preventDefault();
      void app.editor.save(app.client).then(() => refresh(app));
      return;
    }
    if (event.key === 'n') {
      void loadFrame(app, app.editor.frameIndex + 1);
      return;
    }
    if (event.key === 'p' && app.editor.frameIndex > 0) {
      void loadFrame(app, app.editor.frameIndex - 1);
      return;
    }
    const handled = handleKey({
      key: event.key,
      ctrlKey: event.ctrlKey,
      metaKey: event.metaKey,
      shiftKey: event.shiftKey,
    });
    if (handled) {
      event.preventDefault();
      refresh(app);
    }
  });

  canvas.addEventListener('click', (event) => {
    // Nearest box center within 2 m of the click, BEV distance.
    if (!app.prepared) return;
    const rect = canvas.getBoundingClientRect();
    const sx = event.clientX - rect.left;
    const sy = event.clientY - rect.top;
    const wx = (canvas.height / 2 - sy) * app.metersPerPixel;
    const wy = (canvas.width / 2 - sx) * app.metersPerPixel;
    let bestId: number | string | null = null;
    let bestDist = 2.0;
    for (const box of app.prepared.boxes) {
      const d = Math.hypot(box.center[0] - wx, box.center[1] - wy);
      if (d < bestDist) {
        bestDist = d;
        bestId = box.track_id;
      }
    }
    app.editor.select(bestId);
    refresh(app);
  });

  await loadFrame(app, 0);
}

if (typeof document !== 'undefined' && document.getElementById('bev')) {
  void boot();
}

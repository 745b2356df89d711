export { ApiClient, ApiError, decodeChunk } from './api.js';
export { EditorState, TOOL_MODES } from './editor.js';
export type { ConflictInfo, ToolMode } from './editor.js';
export { bindKeyboard } from './keyboard.js';
export type { KeyInput } from './keyboard.js';
export {
  BOX_EDGES,
  ViewerState,
  boxCorners,
  categoryColor,
  overlayFromProjection,
  planCloud,
  prepareFrame,
} from './viewer.js';
export type {
  CloudPlan,
  Overlay,
  OverlaySegment,
  PreparedFrame,
  ViewMode,
} from './viewer.js';
export type * from './types.js';

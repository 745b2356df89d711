import type { EditorState, ToolMode } from './editor.js';

export interface KeyInput {
  key: string;
  ctrlKey?: boolean;
  metaKey?: boolean;
  shiftKey?: boolean;
}

// Coarse steps match the on-screen grid; shift switches to fine.
const TRANSLATE_STEP = 1.0;
const TRANSLATE_FINE = 0.1;
const ROTATE_STEP = 0.1;
const ROTATE_FINE = 0.01;
const SCALE_UP = 1.05;
const SCALE_DOWN = 1 / 1.05;

const MODE_KEYS: Record<string, ToolMode> = {
  '1': 'navigate',
  '2': 'create',
  '3': 'translate',
  '4': 'rotate',
  '5': 'scale',
};

/**
 * Keyboard-only editing: returns a handler that applies one key input
 * to the editor and reports whether it was consumed (so the caller
 * knows when to preventDefault).
 *
 * Screen-up is +x (vehicle forward), screen-left is +y.
 */
export function bindKeyboard(editor: EditorState): (input: KeyInput) => boolean {
  return (input: KeyInput): boolean => {
    const step = input.shiftKey ? TRANSLATE_FINE : TRANSLATE_STEP;
    const turn = input.shiftKey ? ROTATE_FINE : ROTATE_STEP;

    if ((input.ctrlKey || input.metaKey) && input.key.toLowerCase() === 'z') {
      return editor.undo();
    }

    const mode = MODE_KEYS[input.key];
    if (mode) {
      editor.setMode(mode);
      return true;
    }

    switch (input.key) {
      case 'ArrowUp':
        return editor.translateSelected(step, 0, 0);
      case 'ArrowDown':
        return editor.translateSelected(-step, 0, 0);
      case 'ArrowLeft':
        return editor.translateSelected(0, step, 0);
      case 'ArrowRight':
        return editor.translateSelected(0, -step, 0);
      case 'PageUp':
        return editor.translateSelected(0, 0, step);
      case 'PageDown':
        return editor.translateSelected(0, 0, -step);
      case 'q':
        return editor.rotateSelected(turn);
      case 'e':
        return editor.rotateSelected(-turn);
      case '[':
        return editor.scaleSelected(SCALE_DOWN);
      case ']':
        return editor.scaleSelected(SCALE_UP);
      case 'Tab':
        editor.cycleSelection(input.shiftKey ? -1 : 1);
        return true;
      case 'Escape':
        editor.select(null);
        return true;
      case 'u':
        return editor.undo();
      default:
        return false;
    }
  };
}

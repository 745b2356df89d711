import { expect } from 'vitest';
import type { FramePayload, WireBox } from '../src/types.js';

/**
 * Deep equality with Object.is on every number, so 0 vs -0 and any
 * drifted bit fails. This is the "bit for bit" in the contract tests.
 */
export function expectSameNumbers(actual: unknown, wanted: unknown, path = '$'): void {
  if (typeof wanted === 'number') {
    expect(typeof actual, path).toBe('number');
    expect(Object.is(actual, wanted), `${path}: ${actual} is not ${wanted}`).toBe(true);
    return;
  }
  if (Array.isArray(wanted)) {
    expect(Array.isArray(actual), path).toBe(true);
    const got = actual as unknown[];
    expect(got.length, path).toBe(wanted.length);
    wanted.forEach((item, i) => expectSameNumbers(got[i], item, `${path}[${i}]`));
    return;
  }
  if (wanted !== null && typeof wanted === 'object') {
    expect(actual, path).toBeTypeOf('object');
    const gotKeys = Object.keys(actual as object).sort();
    const wantedKeys = Object.keys(wanted).sort();
    expect(gotKeys, path).toEqual(wantedKeys);
    for (const key of wantedKeys) {
      expectSameNumbers(
        (actual as Record<string, unknown>)[key],
        (wanted as Record<string, unknown>)[key],
        `${path}.${key}`,
      );
    }
    return;
  }
  expect(actual, path).toBe(wanted);
}

export function makeBox(
  trackId: number,
  center: [number, number, number],
  overrides: Partial<WireBox> = {},
): WireBox {
  return {
    track_id: trackId,
    category: 'car',
    center,
    dimensions: [4.5, 1.9, 1.6],
    yaw: 0,
    score: null,
    attributes: {},
    ...overrides,
  };
}

export function makePayload(labels: WireBox[], revision = 0): FramePayload {
  return {
    sequence: 'local',
    index: 0,
    timestamp: null,
    revision,
    labels,
    clouds: {},
    images: [],
    calibrations: {},
  };
}

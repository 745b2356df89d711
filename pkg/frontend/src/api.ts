import type {
  AutofitResponse,
  CopyNextResponse,
  DecodedCloud,
  FramePayload,
  InterpolateResponse,
  ProjectResponse,
  SaveResult,
  SequenceInfo,
  WireBox,
} from './types.js';

const CHUNK_MAGIC = 0x31435043; // "CPC1" little-endian

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(`${status}: ${message}`);
  }
}

/**
 * Decode one binary point chunk.
 *
 * Layout: 4-byte magic "CPC1", u32 LE point count, u8 flags (bit 0 =
 * intensity present), then count records of float32 LE x, y, z
 * [, intensity].
 */
export function decodeChunk(buffer: ArrayBuffer): DecodedCloud {
  const view = new DataView(buffer);
  if (buffer.byteLength < 9 || view.getUint32(0, true) !== CHUNK_MAGIC) {
    throw new Error('not a point chunk: bad magic');
  }
  const count = view.getUint32(4, true);
  const hasIntensity = (view.getUint8(8) & 1) !== 0;
  const stride = hasIntensity ? 16 : 12;
  if (buffer.byteLength < 9 + count * stride) {
    throw new Error(`truncated chunk: ${count} points declared, ${buffer.byteLength} bytes`);
  }
  const positions = new Float32Array(count * 3);
  const intensity = hasIntensity ? new Float32Array(count) : null;
  let offset = 9;
  for (let i = 0; i < count; i++) {
    positions[i * 3] = view.getFloat32(offset, true);
    positions[i * 3 + 1] = view.getFloat32(offset + 4, true);
    positions[i * 3 + 2] = view.getFloat32(offset + 8, true);
    if (intensity) intensity[i] = view.getFloat32(offset + 12, true);
    offset += stride;
  }
  return { positions, intensity, count };
}

interface PutLabelsBody {
  base_revision: number;
  boxes: WireBox[];
  author?: string;
}

interface InterpolateBody {
  track_id: number | string;
  start: { frame: number; box: WireBox };
  end: { frame: number; box: WireBox };
  frames?: number[];
}

interface AutofitBody {
  seed: [number, number, number];
  radius: number;
  sensor?: string;
}

/**
 * Typed client for the /v1 API. Conflicts on save come back as values
 * (the annotator has to prompt, not crash); every other non-2xx throws.
 */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  private async getJson<T>(path: string): Promise<T> {
    return (await this.request(path)).json() as Promise<T>;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.request(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    return response.json() as Promise<T>;
  }

  listSequences(): Promise<SequenceInfo[]> {
    return this.getJson('/v1/sequences');
  }

  getFrame(sequenceId: string, index: number, lod = 1.0): Promise<FramePayload> {
    return this.getJson(`/v1/sequences/${sequenceId}/frames/${index}?lod=${lod}`);
  }

  /**
   * Fetch a sensor's cloud at the given level of detail, walking every
   * chunk the server advertises and concatenating in order.
   */
  async fetchCloud(
    sequenceId: string,
    index: number,
    sensor: string,
    lod = 1.0,
  ): Promise<DecodedCloud> {
    const base = `/v1/sequences/${sequenceId}/frames/${index}/cloud/${sensor}?lod=${lod}`;
    const first = await this.request(`${base}&chunk=0`);
    const chunkCount = Number(first.headers.get('X-Chunk-Count') ?? '1');
    const parts = [decodeChunk(await first.arrayBuffer())];
    for (let chunk = 1; chunk < chunkCount; chunk++) {
      const response = await this.request(`${base}&chunk=${chunk}`);
      parts.push(decodeChunk(await response.arrayBuffer()));
    }
    const count = parts.reduce((n, p) => n + p.count, 0);
    const positions = new Float32Array(count * 3);
    const hasIntensity = parts[0]?.intensity !== null;
    const intensity = hasIntensity ? new Float32Array(count) : null;
    let at = 0;
    for (const part of parts) {
      positions.set(part.positions, at * 3);
      if (intensity && part.intensity) intensity.set(part.intensity, at);
      at += part.count;
    }
    return { positions, intensity, count };
  }

  /** PUT the frame's labels; a stale base comes back as a conflict value. */
  async saveLabels(
    sequenceId: string,
    index: number,
    body: PutLabelsBody,
  ): Promise<SaveResult> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/v1/sequences/${sequenceId}/frames/${index}/labels`,
      {
        method: 'PUT',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(body),
      },
    );
    if (response.status === 409) {
      const payload = (await response.json()) as {
        detail: string;
        latest_revision: number;
        labels: WireBox[];
      };
      return {
        ok: false,
        status: 409,
        detail: payload.detail,
        latestRevision: payload.latest_revision,
        serverLabels: payload.labels,
      };
    }
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    const payload = (await response.json()) as { revision: number };
    return { ok: true, revision: payload.revision };
  }

  interpolate(sequenceId: string, body: InterpolateBody): Promise<InterpolateResponse> {
    return this.postJson(`/v1/sequences/${sequenceId}/interpolate`, body);
  }

  autofit(sequenceId: string, index: number, body: AutofitBody): Promise<AutofitResponse> {
    return this.postJson(`/v1/sequences/${sequenceId}/frames/${index}/autofit`, body);
  }

  copyNext(
    sequenceId: string,
    index: number,
    body: { track_ids?: (number | string)[]; base_revision?: number; author?: string } = {},
  ): Promise<CopyNextResponse> {
    return this.postJson(`/v1/sequences/${sequenceId}/frames/${index}/copy-next`, body);
  }

  project(
    sequenceId: string,
    index: number,
    camera: string,
    trackId: number | string,
  ): Promise<ProjectResponse> {
    const query = `camera=${encodeURIComponent(camera)}&track_id=${encodeURIComponent(String(trackId))}`;
    return this.getJson(`/v1/sequences/${sequenceId}/frames/${index}/project?${query}`);
  }
}

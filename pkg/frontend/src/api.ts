import type { SeedPayload, SegmentResponse, SessionInfo } from './types.js';

export interface SessionOptions {
  superpixels?: number;
  compactness?: number;
  lambda?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.error === 'string') detail = body.error;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(resp.status, detail);
}

/** Thin client for the segmentation service; all masks come from the server. */
export class SpmrfClient {
  constructor(readonly baseUrl: string) {}

  async createSession(imageBytes: ArrayBuffer | Uint8Array,
                      options: SessionOptions = {}): Promise<SessionInfo> {
    const body: ArrayBuffer = imageBytes instanceof Uint8Array
      ? (imageBytes.buffer as ArrayBuffer).slice(
          imageBytes.byteOffset,
          imageBytes.byteOffset + imageBytes.byteLength)
      : imageBytes;
    const params = new URLSearchParams();
    if (options.superpixels !== undefined) {
      params.set('superpixels', String(options.superpixels));
    }
    if (options.compactness !== undefined) {
      params.set('compactness', String(options.compactness));
    }
    if (options.lambda !== undefined) {
      params.set('lambda', String(options.lambda));
    }
    const query = params.toString();
    const resp = await fetch(`${this.baseUrl}/session${query ? '?' + query : ''}`, {
      method: 'POST',
      body,
    });
    await raiseForStatus(resp);
    return resp.json();
  }

  async postSeeds(sessionId: string, payload: SeedPayload): Promise<SegmentResponse> {
    const resp = await fetch(`${this.baseUrl}/session/${sessionId}/seeds`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    await raiseForStatus(resp);
    return resp.json();
  }

  async fetchOverlay(sessionId: string): Promise<Uint8Array> {
    const resp = await fetch(`${this.baseUrl}/session/${sessionId}/overlay`);
    await raiseForStatus(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async fetchBoundaries(sessionId: string): Promise<Uint8Array> {
    const resp = await fetch(`${this.baseUrl}/session/${sessionId}/boundaries`);
    await raiseForStatus(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async deleteSession(sessionId: string): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/session/${sessionId}`, {
      method: 'DELETE',
    });
    await raiseForStatus(resp);
  }
}

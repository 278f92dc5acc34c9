/**
 * Round-trip acceptance: upload an image, draw one foreground and one
 * background stroke, and verify the returned overlay mask is byte-identical
 * to the CLI `segment` output for the same seed set, within 2 s end-to-end.
 * Requires the Python package to be installed (pip install -e ..).
 */
import { execFile, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { promisify } from 'node:util';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { SpmrfClient } from '../src/api.js';
import { StrokeStore } from '../src/strokes.js';

const execFileAsync = promisify(execFile);

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const FIXTURE = join(__dirname, 'fixtures', 'scene64.png');
const SUPERPIXELS = 32;

let server: ChildProcess | null = null;

async function waitForServer(timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      await fetch(`${BASE}/session/probe/overlay`);
      return;  // any HTTP response means the service is up
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
  }
  throw new Error('segmentation service did not come up');
}

beforeAll(async () => {
  server = spawn('python3', ['-m', 'spmrf.cli', 'serve', '--port', String(PORT)],
                 { stdio: 'ignore' });
  await waitForServer();
}, 40000);

afterAll(() => {
  server?.kill();
});

describe('UI round trip against the live service', () => {
  it('overlay mask equals the CLI segment output for the same seeds', async () => {
    const imageBytes = readFileSync(FIXTURE);
    const client = new SpmrfClient(BASE);

    const started = Date.now();
    const info = await client.createSession(
      new Uint8Array(imageBytes), { superpixels: SUPERPIXELS });
    expect(info.width).toBe(64);
    expect(info.height).toBe(64);

    const store = new StrokeStore(info.width, info.height);
    store.push({ points: [{ x: 8, y: 24 }, { x: 10, y: 40 }],
                 label: 'fg', radius: 2 });
    store.push({ points: [{ x: 54, y: 24 }, { x: 52, y: 40 }],
                 label: 'bg', radius: 2 });
    const payload = store.seedPayload();

    const resp = await client.postSeeds(info.session_id, payload);
    expect(resp.seed_count).toBe(payload.fg.length + payload.bg.length);
    const overlay = await client.fetchOverlay(info.session_id);
    const elapsedMs = Date.now() - started;
    expect(elapsedMs).toBeLessThan(2000);
    expect(overlay.length).toBeGreaterThan(0);

    const dir = mkdtempSync(join(tmpdir(), 'spmrf-ui-'));
    const seedsPath = join(dir, 'seeds.json');
    const maskPath = join(dir, 'mask.png');
    writeFileSync(seedsPath, JSON.stringify(payload));
    await execFileAsync('python3', [
      '-m', 'spmrf.cli', 'segment',
      '--image', FIXTURE,
      '--seeds', seedsPath,
      '--slic', String(SUPERPIXELS),
      '--out-mask', maskPath,
    ]);
    const cliMask = readFileSync(maskPath);
    expect(Buffer.from(overlay).equals(cliMask)).toBe(true);
  }, 30000);

  it('base64 mask in the seed response matches the overlay endpoint', async () => {
    const imageBytes = readFileSync(FIXTURE);
    const client = new SpmrfClient(BASE);
    const info = await client.createSession(
      new Uint8Array(imageBytes), { superpixels: SUPERPIXELS });
    const store = new StrokeStore(info.width, info.height);
    store.push({ points: [{ x: 6, y: 32 }], label: 'fg', radius: 2 });
    store.push({ points: [{ x: 58, y: 32 }], label: 'bg', radius: 2 });
    const resp = await client.postSeeds(info.session_id, store.seedPayload());
    const overlay = await client.fetchOverlay(info.session_id);
    expect(Buffer.from(overlay).toString('base64')).toBe(resp.mask_png_base64);
    await client.deleteSession(info.session_id);
  }, 30000);

  it('undo replay: re-posting the remaining seed set reproduces the earlier mask', async () => {
    const imageBytes = readFileSync(FIXTURE);
    const client = new SpmrfClient(BASE);

    // one-stroke baseline (plus a fixed bg stroke so the model is solvable)
    const mkStore = () => {
      const store = new StrokeStore(64, 64);
      store.push({ points: [{ x: 6, y: 30 }, { x: 8, y: 36 }],
                   label: 'fg', radius: 2 });
      store.push({ points: [{ x: 56, y: 30 }], label: 'bg', radius: 2 });
      return store;
    };

    const sessionA = await client.createSession(
      new Uint8Array(imageBytes), { superpixels: SUPERPIXELS });
    const baseline = await client.postSeeds(sessionA.session_id,
                                            mkStore().seedPayload());

    const sessionB = await client.createSession(
      new Uint8Array(imageBytes), { superpixels: SUPERPIXELS });
    const store = mkStore();
    store.push({ points: [{ x: 30, y: 10 }], label: 'fg', radius: 2 });
    await client.postSeeds(sessionB.session_id, store.seedPayload());
    expect(store.undo()).toBe(true);
    // the service accumulates seeds, so replay happens in a fresh session
    const sessionC = await client.createSession(
      new Uint8Array(imageBytes), { superpixels: SUPERPIXELS });
    const replay = await client.postSeeds(sessionC.session_id,
                                          store.seedPayload());
    expect(replay.mask_png_base64).toBe(baseline.mask_png_base64);
  }, 30000);
});

import { ApiError, SpmrfClient } from './api.js';
import { CoalescingQueue } from './queue.js';
import { StrokeStore } from './strokes.js';
import type { Point, SeedLabel, SegmentResponse, Stroke } from './types.js';

type Tool = SeedLabel | 'box';

const FG_COLOR = 'rgba(46, 204, 113, 0.9)';
const BG_COLOR = 'rgba(231, 76, 60, 0.9)';
const MASK_FILL: [number, number, number, number] = [66, 133, 244, 128];
const MASK_OUTLINE: [number, number, number, number] = [20, 60, 160, 255];
const BOUNDARY_TINT: [number, number, number, number] = [255, 255, 0, 90];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

/** Decode a PNG byte stream into ImageData via an offscreen canvas. */
async function decodePng(bytes: Uint8Array): Promise<ImageData> {
  const blob = new Blob([bytes.buffer as ArrayBuffer], { type: 'image/png' });
  const url = URL.createObjectURL(blob);
  try {
    const img = new Image();
    await new Promise<void>((resolve, reject) => {
      img.onload = () => resolve();
      img.onerror = () => reject(new Error('mask decode failed'));
      img.src = url;
    });
    const canvas = document.createElement('canvas');
    canvas.width = img.width;
    canvas.height = img.height;
    const ctx = canvas.getContext('2d')!;
    ctx.drawImage(img, 0, 0);
    return ctx.getImageData(0, 0, img.width, img.height);
  } finally {
    URL.revokeObjectURL(url);
  }
}

function maskFromImageData(data: ImageData): Uint8Array {
  const out = new Uint8Array(data.width * data.height);
  for (let i = 0; i < out.length; i++) {
    out[i] = data.data[i * 4] > 0 ? 1 : 0;
  }
  return out;
}

export class SeedUiApp {
  private client: SpmrfClient;
  private store: StrokeStore | null = null;
  private queue = new CoalescingQueue();
  private sessionId: string | null = null;
  private imageBytes: ArrayBuffer | null = null;
  // the service accumulates seeds per session, so removing strokes requires
  // replaying the remaining set into a fresh session
  private needsFreshSession = false;
  private imageBitmap: ImageBitmap | null = null;
  private mask: Uint8Array | null = null;
  private boundaries: Uint8Array | null = null;
  private tool: Tool = 'fg';
  private radius = 3;
  private drawing: Stroke | null = null;
  private boxStart: Point | null = null;
  private width = 0;
  private height = 0;

  private canvas = el<HTMLCanvasElement>('canvas');
  private ctx = this.canvas.getContext('2d')!;

  constructor() {
    this.client = new SpmrfClient(
      (el<HTMLInputElement>('service-url')).value.replace(/\/+$/, ''));
    this.bindControls();
  }

  private bindControls(): void {
    el<HTMLInputElement>('file-input').addEventListener('change', (ev) => {
      const input = ev.target as HTMLInputElement;
      if (input.files && input.files[0]) void this.upload(input.files[0]);
    });
    el<HTMLInputElement>('service-url').addEventListener('change', (ev) => {
      this.client = new SpmrfClient(
        (ev.target as HTMLInputElement).value.replace(/\/+$/, ''));
    });
    for (const tool of ['fg', 'bg', 'box'] as Tool[]) {
      el<HTMLButtonElement>(`tool-${tool}`).addEventListener('click', () => {
        this.tool = tool;
        this.refreshToolButtons();
      });
    }
    el<HTMLInputElement>('brush-radius').addEventListener('input', (ev) => {
      this.radius = Number((ev.target as HTMLInputElement).value);
      el<HTMLSpanElement>('brush-radius-value').textContent = String(this.radius);
    });
    el<HTMLButtonElement>('undo').addEventListener('click', () => this.undo());
    el<HTMLButtonElement>('segment').addEventListener('click', () => {
      this.requestSegmentation();
    });
    el<HTMLInputElement>('show-boundaries').addEventListener('change', () => {
      void this.toggleBoundaries();
    });

    this.canvas.addEventListener('pointerdown', (ev) => this.pointerDown(ev));
    this.canvas.addEventListener('pointermove', (ev) => this.pointerMove(ev));
    this.canvas.addEventListener('pointerup', (ev) => this.pointerUp(ev));
    this.refreshToolButtons();
    this.refreshSegmentButton();
  }

  private toast(message: string, kind: 'error' | 'info' = 'error'): void {
    const host = el<HTMLDivElement>('toasts');
    const node = document.createElement('div');
    node.className = `toast ${kind}`;
    node.textContent = message;
    host.appendChild(node);
    setTimeout(() => node.remove(), 5000);
  }

  private async upload(file: File): Promise<void> {
    try {
      const bytes = await file.arrayBuffer();
      const info = await this.client.createSession(bytes, {
        superpixels: Number(el<HTMLInputElement>('superpixels').value) || 800,
      });
      this.sessionId = info.session_id;
      this.imageBytes = bytes;
      this.needsFreshSession = false;
      this.width = info.width;
      this.height = info.height;
      this.store = new StrokeStore(info.width, info.height);
      this.mask = null;
      this.boundaries = null;
      this.imageBitmap = await createImageBitmap(
        new Blob([bytes], { type: file.type || 'image/png' }));
      this.canvas.width = info.width;
      this.canvas.height = info.height;
      el<HTMLSpanElement>('session-info').textContent =
        `${info.width}x${info.height}, ${info.superpixel_count} superpixels`;
      this.toast(`session ready (${info.superpixel_count} superpixels)`, 'info');
      this.render();
      this.refreshSegmentButton();
    } catch (err) {
      this.toast(`upload failed: ${(err as Error).message}`);
    }
  }

  private canvasPoint(ev: PointerEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * this.width;
    const y = ((ev.clientY - rect.top) / rect.height) * this.height;
    return {
      x: Math.max(0, Math.min(this.width - 1, Math.round(x))),
      y: Math.max(0, Math.min(this.height - 1, Math.round(y))),
    };
  }

  private pointerDown(ev: PointerEvent): void {
    if (!this.store) return;
    this.canvas.setPointerCapture(ev.pointerId);
    const p = this.canvasPoint(ev);
    if (this.tool === 'box') {
      this.boxStart = p;
      return;
    }
    this.drawing = { points: [p], label: this.tool, radius: this.radius };
  }

  private pointerMove(ev: PointerEvent): void {
    if (!this.store) return;
    const p = this.canvasPoint(ev);
    if (this.drawing) {
      const last = this.drawing.points[this.drawing.points.length - 1];
      if (last.x !== p.x || last.y !== p.y) this.drawing.points.push(p);
      this.render();
    } else if (this.boxStart) {
      this.store.setBox({
        x0: Math.min(this.boxStart.x, p.x),
        y0: Math.min(this.boxStart.y, p.y),
        x1: Math.max(this.boxStart.x, p.x),
        y1: Math.max(this.boxStart.y, p.y),
      });
      this.render();
    }
  }

  private pointerUp(ev: PointerEvent): void {
    if (!this.store) return;
    if (this.tool === 'box' && this.boxStart) {
      this.pointerMove(ev);
      this.boxStart = null;
      this.requestSegmentationIfReady();
      return;
    }
    if (this.drawing) {
      this.store.push(this.drawing);
      this.drawing = null;
      this.refreshSegmentButton();
      this.requestSegmentation();
    }
  }

  private undo(): void {
    if (!this.store || !this.store.undo()) return;
    // accumulated server state now holds more seeds than the stroke stack;
    // the next request must replay into a fresh session
    this.needsFreshSession = true;
    this.refreshSegmentButton();
    if (this.store.strokeCount === 0) {
      this.mask = null;
      this.render();
      return;
    }
    this.requestSegmentation();
  }

  private requestSegmentationIfReady(): void {
    if (this.store && this.store.strokeCount > 0) this.requestSegmentation();
  }

  /** Queues a seed POST with the current union; in-flight requests coalesce. */
  private requestSegmentation(): void {
    const store = this.store;
    if (!store || !this.sessionId || store.strokeCount === 0) return;
    const payload = store.seedPayload();
    this.queue.schedule(async () => {
      try {
        if (this.needsFreshSession && this.imageBytes) {
          const old = this.sessionId;
          const info = await this.client.createSession(this.imageBytes, {
            superpixels:
              Number(el<HTMLInputElement>('superpixels').value) || 800,
          });
          this.sessionId = info.session_id;
          this.needsFreshSession = false;
          if (old) void this.client.deleteSession(old).catch(() => undefined);
        }
        if (!this.sessionId) return;
        const resp = await this.client.postSeeds(this.sessionId, payload);
        await this.applyResponse(resp);
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) {
          this.sessionId = null;
          this.toast('session expired; please re-upload the image');
        } else {
          this.toast(`segmentation failed: ${(err as Error).message}`);
        }
      }
    });
  }

  private async applyResponse(resp: SegmentResponse): Promise<void> {
    const bytes = Uint8Array.from(atob(resp.mask_png_base64),
                                  (c) => c.charCodeAt(0));
    this.mask = maskFromImageData(await decodePng(bytes));
    el<HTMLSpanElement>('latency').textContent =
      `solve ${resp.solve_ms.toFixed(2)} ms / total ${resp.timings_ms.total.toFixed(1)} ms`;
    el<HTMLSpanElement>('energy').textContent = resp.energy.toExponential(4);
    this.render();
  }

  private async toggleBoundaries(): Promise<void> {
    const want = el<HTMLInputElement>('show-boundaries').checked;
    if (want && !this.boundaries && this.sessionId) {
      try {
        const bytes = await this.client.fetchBoundaries(this.sessionId);
        this.boundaries = maskFromImageData(await decodePng(bytes));
      } catch (err) {
        this.toast(`boundary fetch failed: ${(err as Error).message}`);
      }
    }
    this.render();
  }

  private refreshToolButtons(): void {
    for (const tool of ['fg', 'bg', 'box'] as Tool[]) {
      el<HTMLButtonElement>(`tool-${tool}`).classList.toggle(
        'active', this.tool === tool);
    }
  }

  private refreshSegmentButton(): void {
    el<HTMLButtonElement>('segment').disabled =
      !this.store || this.store.strokeCount === 0;
    el<HTMLButtonElement>('undo').disabled =
      !this.store || this.store.strokeCount === 0;
  }

  private paintMaskLayer(mask: Uint8Array, fill: number[], outline: number[] | null): void {
    const layer = this.ctx.createImageData(this.width, this.height);
    for (let i = 0; i < mask.length; i++) {
      if (!mask[i]) continue;
      const x = i % this.width;
      const y = Math.floor(i / this.width);
      let isBoundary = false;
      if (outline) {
        isBoundary = x === 0 || y === 0 || x === this.width - 1 ||
          y === this.height - 1 || !mask[i - 1] || !mask[i + 1] ||
          !mask[i - this.width] || !mask[i + this.width];
      }
      const color = isBoundary && outline ? outline : fill;
      layer.data.set(color, i * 4);
    }
    const scratch = document.createElement('canvas');
    scratch.width = this.width;
    scratch.height = this.height;
    scratch.getContext('2d')!.putImageData(layer, 0, 0);
    this.ctx.drawImage(scratch, 0, 0);
  }

  private render(): void {
    if (!this.imageBitmap) return;
    this.ctx.clearRect(0, 0, this.width, this.height);
    this.ctx.drawImage(this.imageBitmap, 0, 0);
    if (this.boundaries && el<HTMLInputElement>('show-boundaries').checked) {
      this.paintMaskLayer(this.boundaries, BOUNDARY_TINT, null);
    }
    if (this.mask) {
      this.paintMaskLayer(this.mask, MASK_FILL, MASK_OUTLINE);
    }
    if (this.store) {
      const box = this.store.getBox();
      if (box) {
        this.ctx.strokeStyle = 'rgba(255, 255, 255, 0.9)';
        this.ctx.setLineDash([4, 3]);
        this.ctx.strokeRect(box.x0 + 0.5, box.y0 + 0.5,
                            box.x1 - box.x0, box.y1 - box.y0);
        this.ctx.setLineDash([]);
      }
    }
    if (this.drawing) {
      this.ctx.strokeStyle = this.drawing.label === 'fg' ? FG_COLOR : BG_COLOR;
      this.ctx.lineWidth = this.drawing.radius * 2;
      this.ctx.lineCap = 'round';
      this.ctx.lineJoin = 'round';
      this.ctx.beginPath();
      const [first, ...rest] = this.drawing.points;
      this.ctx.moveTo(first.x, first.y);
      for (const p of rest) this.ctx.lineTo(p.x, p.y);
      this.ctx.stroke();
    }
  }
}

new SeedUiApp();

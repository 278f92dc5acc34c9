import { rasterizeStroke } from './rasterize.js';
import type { Box, SeedPayload, Stroke } from './types.js';

function key(x: number, y: number): number {
  return y * 0x10000 + x;
}

function sortedPoints(keys: Set<number>): [number, number][] {
  return [...keys]
    .sort((a, b) => a - b)
    .map((k) => [k % 0x10000, Math.floor(k / 0x10000)]);
}

/** One-pixel ring just outside the box, clipped to the image. */
export function boxExteriorRing(box: Box, width: number, height: number): [number, number][] {
  const keys = new Set<number>();
  for (let x = box.x0 - 1; x <= box.x1 + 1; x++) {
    for (const y of [box.y0 - 1, box.y1 + 1]) {
      if (x >= 0 && x < width && y >= 0 && y < height) keys.add(key(x, y));
    }
  }
  for (let y = box.y0 - 1; y <= box.y1 + 1; y++) {
    for (const x of [box.x0 - 1, box.x1 + 1]) {
      if (x >= 0 && x < width && y >= 0 && y < height) keys.add(key(x, y));
    }
  }
  return sortedPoints(keys);
}

/**
 * Stroke history with undo.  The seed payload is always rebuilt as the plain
 * union of the rasterized strokes, so it is order-independent and undo is a
 * pop plus replay.
 */
export class StrokeStore {
  private strokes: Stroke[] = [];
  private box: Box | null = null;

  constructor(readonly width: number, readonly height: number) {}

  get strokeCount(): number {
    return this.strokes.length;
  }

  push(stroke: Stroke): void {
    this.strokes.push(stroke);
  }

  /** Removes the newest stroke; returns false when there is none. */
  undo(): boolean {
    return this.strokes.pop() !== undefined;
  }

  setBox(box: Box | null): void {
    this.box = box;
  }

  getBox(): Box | null {
    return this.box;
  }

  clear(): void {
    this.strokes = [];
    this.box = null;
  }

  /**
   * Union of all rasterized strokes, plus the box.  With a box present and no
   * background strokes, the exterior ring is auto-seeded as background,
   * mirroring the box's hard constraint.
   */
  seedPayload(): SeedPayload {
    const fgKeys = new Set<number>();
    const bgKeys = new Set<number>();
    for (const stroke of this.strokes) {
      const target = stroke.label === 'fg' ? fgKeys : bgKeys;
      for (const [x, y] of rasterizeStroke(stroke, this.width, this.height)) {
        target.add(key(x, y));
      }
    }
    let bg = sortedPoints(bgKeys);
    if (bg.length === 0 && this.box !== null) {
      bg = boxExteriorRing(this.box, this.width, this.height);
    }
    return {
      fg: sortedPoints(fgKeys),
      bg,
      box: this.box === null ? null
        : [this.box.x0, this.box.y0, this.box.x1, this.box.y1],
    };
  }
}

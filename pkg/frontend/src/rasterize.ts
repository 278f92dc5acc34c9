import type { Point, Stroke } from './types.js';

/** Squared distance from a point to the segment [a, b]. */
function segmentDistanceSq(px: number, py: number, a: Point, b: Point): number {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const lenSq = dx * dx + dy * dy;
  let t = 0;
  if (lenSq > 0) {
    t = ((px - a.x) * dx + (py - a.y) * dy) / lenSq;
    t = Math.max(0, Math.min(1, t));
  }
  const cx = a.x + t * dx;
  const cy = a.y + t * dy;
  return (px - cx) * (px - cx) + (py - cy) * (py - cy);
}

/**
 * All pixels within the brush radius of the stroke's polyline, clipped to the
 * image bounds and deduplicated, in raster order.  A single-point stroke is a
 * disk; multi-point strokes are the union of the capsules around each segment.
 */
export function rasterizeStroke(stroke: Stroke, width: number, height: number): [number, number][] {
  if (stroke.points.length === 0) {
    throw new Error('stroke must contain at least one point');
  }
  if (stroke.radius < 1) {
    throw new Error('brush radius must be >= 1');
  }
  const r = stroke.radius;
  const rSq = r * r;
  const pts = stroke.points;

  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const p of pts) {
    minX = Math.min(minX, p.x);
    minY = Math.min(minY, p.y);
    maxX = Math.max(maxX, p.x);
    maxY = Math.max(maxY, p.y);
  }
  const x0 = Math.max(0, Math.floor(minX - r));
  const y0 = Math.max(0, Math.floor(minY - r));
  const x1 = Math.min(width - 1, Math.ceil(maxX + r));
  const y1 = Math.min(height - 1, Math.ceil(maxY + r));

  const out: [number, number][] = [];
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      let covered = false;
      if (pts.length === 1) {
        const dx = x - pts[0].x;
        const dy = y - pts[0].y;
        covered = dx * dx + dy * dy <= rSq;
      } else {
        for (let i = 0; i + 1 < pts.length && !covered; i++) {
          covered = segmentDistanceSq(x, y, pts[i], pts[i + 1]) <= rSq;
        }
      }
      if (covered) {
        out.push([x, y]);
      }
    }
  }
  return out;
}

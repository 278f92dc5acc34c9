export type SeedLabel = 'fg' | 'bg';

export interface Point {
  x: number;
  y: number;
}

/** One brush gesture: a polyline of canvas points with a label and radius. */
export interface Stroke {
  points: Point[];
  label: SeedLabel;
  radius: number;
}

/** Inclusive pixel rectangle, origin top-left. */
export interface Box {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Wire format of a seed POST: pixel coordinates, origin top-left. */
export interface SeedPayload {
  fg: [number, number][];
  bg: [number, number][];
  box: [number, number, number, number] | null;
}

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
  superpixel_count: number;
}

export interface SegmentResponse {
  session_id: string;
  width: number;
  height: number;
  superpixel_count: number;
  energy: number;
  seed_count: number;
  solve_ms: number;
  timings_ms: {
    unary: number;
    aggregation: number;
    solve: number;
    total: number;
  };
  mask_png_base64: string;
}

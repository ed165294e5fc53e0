import type { Rect } from "./types";

/**
 * Pure zoom/pan mapping between image pixels and canvas pixels.
 *
 * The overlay renderer never transforms box semantics: a displayed rectangle
 * is exactly the API box pushed through this mapping, and `canvasToImage`
 * inverts it.
 */
export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export const IDENTITY_VIEW: ViewTransform = { zoom: 1, panX: 0, panY: 0 };

export function imageToCanvas(
  view: ViewTransform,
  x: number,
  y: number,
): [number, number] {
  return [x * view.zoom + view.panX, y * view.zoom + view.panY];
}

export function canvasToImage(
  view: ViewTransform,
  x: number,
  y: number,
): [number, number] {
  return [(x - view.panX) / view.zoom, (y - view.panY) / view.zoom];
}

/** Map source-frame box corners to a canvas rectangle, exactly. */
export function boxToCanvasRect(
  view: ViewTransform,
  box: readonly [number, number, number, number],
): Rect {
  const [x1, y1] = imageToCanvas(view, box[0], box[1]);
  const [x2, y2] = imageToCanvas(view, box[2], box[3]);
  return { x: x1, y: y1, w: x2 - x1, h: y2 - y1 };
}

export function rectToBox(
  view: ViewTransform,
  rect: Rect,
): [number, number, number, number] {
  const [x1, y1] = canvasToImage(view, rect.x, rect.y);
  const [x2, y2] = canvasToImage(view, rect.x + rect.w, rect.y + rect.h);
  return [x1, y1, x2, y2];
}

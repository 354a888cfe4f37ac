/**
 * Zoom/pan state and the screen <-> image coordinate mapping.
 *
 * A viewport is the affine map screen = image * scale + offset. All
 * hit-testing goes through pixelAt, so a click resolves to the same image
 * pixel no matter how the view is zoomed or panned — the mapping is the
 * single source of geometric truth.
 */

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export const MIN_SCALE = 0.125;
export const MAX_SCALE = 64;

export function imageToScreen(v: Viewport, ix: number, iy: number): { x: number; y: number } {
  return { x: ix * v.scale + v.offsetX, y: iy * v.scale + v.offsetY };
}

export function screenToImage(v: Viewport, sx: number, sy: number): { x: number; y: number } {
  return { x: (sx - v.offsetX) / v.scale, y: (sy - v.offsetY) / v.scale };
}

/** Integer image pixel under a screen point, or null when outside the image. */
export function pixelAt(
  v: Viewport,
  sx: number,
  sy: number,
  width: number,
  height: number,
): { x: number; y: number } | null {
  const p = screenToImage(v, sx, sy);
  const x = Math.floor(p.x);
  const y = Math.floor(p.y);
  if (x < 0 || y < 0 || x >= width || y >= height) return null;
  return { x, y };
}

/** Rescale about a screen anchor so the image point under it stays put. */
export function zoomAt(v: Viewport, sx: number, sy: number, factor: number): Viewport {
  const scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, v.scale * factor));
  const anchor = screenToImage(v, sx, sy);
  return {
    scale,
    offsetX: sx - anchor.x * scale,
    offsetY: sy - anchor.y * scale,
  };
}

export function pan(v: Viewport, dx: number, dy: number): Viewport {
  return { scale: v.scale, offsetX: v.offsetX + dx, offsetY: v.offsetY + dy };
}

/** Largest whole view of the image, centered in a viewWidth x viewHeight box. */
export function fitImage(
  width: number,
  height: number,
  viewWidth: number,
  viewHeight: number,
): Viewport {
  const scale = Math.min(viewWidth / width, viewHeight / height);
  return {
    scale,
    offsetX: (viewWidth - width * scale) / 2,
    offsetY: (viewHeight - height * scale) / 2,
  };
}

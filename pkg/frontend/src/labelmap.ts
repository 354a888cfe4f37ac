/**
 * Client-side hit-testing against the id-encoded label map.
 *
 * The service renders superpixel ids into a PNG as 24-bit colors
 * (id = R*65536 + G*256 + B), so the browser can resolve a click to a
 * superpixel instantly; the server remains the authority on what the edit
 * actually did.
 */

/** Decoded RGBA pixels, the shape of both canvas ImageData and pngjs output. */
export interface PixelGrid {
  width: number;
  height: number;
  data: Uint8Array | Uint8ClampedArray;
}

/** Superpixel id at an image pixel, or null when outside the image. */
export function superpixelIdAt(grid: PixelGrid, x: number, y: number): number | null {
  if (!Number.isInteger(x) || !Number.isInteger(y)) return null;
  if (x < 0 || y < 0 || x >= grid.width || y >= grid.height) return null;
  const i = (y * grid.width + x) * 4;
  return grid.data[i] * 65536 + grid.data[i + 1] * 256 + grid.data[i + 2];
}

/**
 * Per-superpixel bounding boxes [x0, y0, x1, y1] (inclusive), used to draw
 * hover/pending highlights without rescanning the grid on every frame.
 */
export function boundingBoxes(grid: PixelGrid, count: number): Int32Array {
  const boxes = new Int32Array(count * 4);
  for (let i = 0; i < count; i++) {
    boxes[i * 4] = grid.width;
    boxes[i * 4 + 1] = grid.height;
    boxes[i * 4 + 2] = -1;
    boxes[i * 4 + 3] = -1;
  }
  const { width, height, data } = grid;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      const id = data[i] * 65536 + data[i + 1] * 256 + data[i + 2];
      if (id >= count) continue;
      const b = id * 4;
      if (x < boxes[b]) boxes[b] = x;
      if (y < boxes[b + 1]) boxes[b + 1] = y;
      if (x > boxes[b + 2]) boxes[b + 2] = x;
      if (y > boxes[b + 3]) boxes[b + 3] = y;
    }
  }
  return boxes;
}

/** Browser-side PNG decoding via the canvas pipeline. */

import type { PixelGrid } from "./labelmap";

/**
 * Decode PNG bytes to RGBA pixels using createImageBitmap and an offscreen
 * canvas. Tests inject a pure decoder instead, since neither API exists
 * outside a real browser.
 */
export async function decodePngBrowser(bytes: ArrayBuffer): Promise<PixelGrid> {
  const bitmap = await createImageBitmap(new Blob([bytes], { type: "image/png" }));
  const canvas = new OffscreenCanvas(bitmap.width, bitmap.height);
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");
  ctx.drawImage(bitmap, 0, 0);
  const image = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  return { width: image.width, height: image.height, data: image.data };
}

/** Decode PNG bytes to something drawImage accepts; null when unsupported. */
export async function loadBitmapBrowser(bytes: ArrayBuffer): Promise<ImageBitmap | null> {
  if (typeof createImageBitmap === "undefined") return null;
  return createImageBitmap(new Blob([bytes], { type: "image/png" }));
}

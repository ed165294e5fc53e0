/**
 * Window/level display mapping for grayscale images. Purely photometric;
 * coordinates are untouched by construction.
 */
export function windowLevel(value: number, window: number, level: number): number {
  const lo = level - window / 2;
  if (window <= 0) {
    return value < level ? 0 : 255;
  }
  const t = (value - lo) / window;
  return Math.round(255 * Math.min(1, Math.max(0, t)));
}

export function applyWindowLevel(
  pixels: Uint8ClampedArray,
  window: number,
  level: number,
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(pixels.length);
  for (let i = 0; i < pixels.length; i += 4) {
    const v = windowLevel(pixels[i], window, level);
    out[i] = v;
    out[i + 1] = v;
    out[i + 2] = v;
    out[i + 3] = pixels[i + 3];
  }
  return out;
}

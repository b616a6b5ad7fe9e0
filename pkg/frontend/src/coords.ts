/**
 * Latent <-> canvas coordinate mapping. The unit circle fills the canvas with
 * a small margin; the y axis flips (canvas grows downward).
 */

export interface CanvasGeometry {
  size: number; // square canvas, CSS pixels
  margin: number; // fraction of half-size kept clear around the circle
}

export const DEFAULT_GEOMETRY: CanvasGeometry = { size: 480, margin: 0.1 };

function radius(geom: CanvasGeometry): number {
  return (geom.size / 2) * (1 - geom.margin);
}

export function latentToCanvas(
  x: number,
  y: number,
  geom: CanvasGeometry = DEFAULT_GEOMETRY,
): { px: number; py: number } {
  const half = geom.size / 2;
  return { px: half + x * radius(geom), py: half - y * radius(geom) };
}

export function canvasToLatent(
  px: number,
  py: number,
  geom: CanvasGeometry = DEFAULT_GEOMETRY,
): { x: number; y: number } {
  const half = geom.size / 2;
  return { x: (px - half) / radius(geom), y: (half - py) / radius(geom) };
}

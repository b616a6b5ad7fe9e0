/** Family base hue with a small per-instrument offset, matching the map
 * rendering convention used server-side. */

export function pointColor(
  familyId: number,
  instrumentId: number,
  nFamilies: number,
  instrumentsPerFamily: number,
): string {
  const baseHue = (familyId / Math.max(nFamilies, 1)) * 360;
  const offset =
    ((instrumentId % instrumentsPerFamily) /
      (instrumentsPerFamily * Math.max(nFamilies, 1) * 1.5)) *
    360;
  return `hsl(${(baseHue + offset) % 360}, 70%, 48%)`;
}

/** Piezo stage map: controller volts (0-10 V) <-> position (0-100 um). */

export const STAGE_RANGE_UM = 100.0;
export const STAGE_RANGE_V = 10.0;

export function voltsToUm(volts: number): number {
  return volts * (STAGE_RANGE_UM / STAGE_RANGE_V);
}

/** Inverse stage map; clamps to the physical travel. */
export function umToVolts(um: number): number {
  const clamped = Math.min(Math.max(um, 0), STAGE_RANGE_UM);
  return clamped * (STAGE_RANGE_V / STAGE_RANGE_UM);
}

/** Stage voltages that move the focus to (x, y) um, keeping the current z. */
export function clickToVoltages(
  xUm: number,
  yUm: number,
  current: [number, number, number],
): [number, number, number] {
  return [umToVolts(xUm), umToVolts(yUm), current[2]];
}

/** Map a canvas pixel to scan coordinates (um). */
export function pixelToUm(
  px: number,
  py: number,
  canvasW: number,
  canvasH: number,
  region: [[number, number], [number, number]],
): { x: number; y: number } {
  const [[x0, x1], [y0, y1]] = region;
  return {
    x: x0 + (px / Math.max(canvasW - 1, 1)) * (x1 - x0),
    y: y0 + (py / Math.max(canvasH - 1, 1)) * (y1 - y0),
  };
}

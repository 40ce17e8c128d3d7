import { describe, expect, it } from "vitest";
import {
  clickToVoltages,
  pixelToUm,
  umToVolts,
  voltsToUm,
} from "../src/stageMap.js";

describe("stage map", () => {
  it("round-trips volts <-> um across the range", () => {
    for (const v of [0, 1.25, 5, 9.9, 10]) {
      expect(umToVolts(voltsToUm(v))).toBeCloseTo(v, 12);
    }
    expect(voltsToUm(5)).toBeCloseTo(50.0, 12);
    expect(umToVolts(37.5)).toBeCloseTo(3.75, 12);
  });

  it("clamps positions outside the travel", () => {
    expect(umToVolts(-5)).toBe(0);
    expect(umToVolts(150)).toBe(10);
  });

  it("click keeps the current z voltage", () => {
    const volts = clickToVoltages(30, 70, [1, 2, 3.3]);
    expect(volts[0]).toBeCloseTo(3.0, 12);
    expect(volts[1]).toBeCloseTo(7.0, 12);
    expect(volts[2]).toBe(3.3);
  });

  it("maps canvas pixels to scan coordinates", () => {
    const region: [[number, number], [number, number]] = [
      [48, 52],
      [10, 14],
    ];
    expect(pixelToUm(0, 0, 200, 200, region)).toEqual({ x: 48, y: 10 });
    const far = pixelToUm(199, 199, 200, 200, region);
    expect(far.x).toBeCloseTo(52, 10);
    expect(far.y).toBeCloseTo(14, 10);
    const mid = pixelToUm(99.5, 99.5, 200, 200, region);
    expect(mid.x).toBeCloseTo(50, 10);
    expect(mid.y).toBeCloseTo(12, 10);
  });
});

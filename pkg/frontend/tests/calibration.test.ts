import { describe, expect, it } from "vitest";
import {
  adopt,
  bzFromSplitting,
  offeredCalibration,
  pulseDurations,
} from "../src/calibration.js";
import type { ExperimentDonePayload, FitResultJson } from "../src/types.js";

function fit(
  model: string,
  parameters: Record<string, [number, number]>,
  converged = true,
): FitResultJson {
  return { model, parameters, residual_norm: 0.1, converged, n_iter: 12 };
}

function donePayload(
  kind: ExperimentDonePayload["kind"],
  fits: FitResultJson[],
  metadata: Record<string, unknown> = {},
): ExperimentDonePayload {
  return {
    experiment_id: "job-0001",
    kind,
    dataset_id: "ds-0001",
    aborted: false,
    fits,
    metadata,
  };
}

describe("pulse durations", () => {
  it("derives grid-snapped pi pulses from the Rabi frequency", () => {
    const { tauPi, tauPi2 } = pulseDurations(20.4e6);
    expect(tauPi).toBeCloseTo(24.5e-9, 12);
    expect(tauPi2).toBeCloseTo(12.25e-9, 12);
  });

  it("snaps nearby frequencies onto the same timing grid", () => {
    const { tauPi, tauPi2 } = pulseDurations(20.408e6);
    expect(tauPi).toBeCloseTo(24.5e-9, 12);
    expect(tauPi2).toBeCloseTo(12.25e-9, 12);
  });

  it("rejects non-positive frequencies", () => {
    expect(() => pulseDurations(0)).toThrow();
  });
});

describe("field from splitting", () => {
  it("matches gamma_e = 28 GHz/T", () => {
    const bz = bzFromSplitting(2.87e9 + 9.968e6, 2.87e9 - 9.968e6);
    expect(bz / 1e-6).toBeCloseTo(356.0, 1);
  });
});

describe("offered calibration", () => {
  it("rabi offers omega plus both pulse durations", () => {
    const done = donePayload("rabi", [
      fit("rabi_eq4", {
        a: [0.1, 0.001],
        omega: [20.4e6, 1e4],
        phi: [0, 0.01],
        t2_star: [320e-9, 1e-8],
        c: [0.9, 0.001],
      }),
    ]);
    const offered = offeredCalibration(done);
    expect(offered.omegaHz).toBeCloseTo(20.4e6, 0);
    expect(offered.tauPiS).toBeCloseTo(24.5e-9, 12);
    expect(offered.tauPi2S).toBeCloseTo(12.25e-9, 12);
  });

  it("odmr with two dips offers the mid frequency and the field", () => {
    const lo = 2.87e9 - 9.968e6;
    const hi = 2.87e9 + 9.968e6;
    const done = donePayload(
      "odmr",
      [fit("lorentzian_multi(2)", { offset: [1500, 5] })],
      {
        dip_centers_hz: [lo, hi],
        inferred_bz_t: 356.0e-6,
      },
    );
    const offered = offeredCalibration(done);
    expect(offered.resonanceHz).toBeCloseTo(2.87e9, 0);
    expect(offered.bzT).toBeCloseTo(356.0e-6, 10);
  });

  it("a failed fit offers nothing", () => {
    const done = donePayload(
      "rabi",
      [fit("rabi_eq4", { omega: [20.4e6, 1e4] }, false)],
      { tau_pi: 24.5e-9 },
    );
    expect(offeredCalibration(done)).toEqual({});
  });

  it("adopt merges into the store without clearing other fields", () => {
    const store = adopt({ resonanceHz: 2.87e9 }, { omegaHz: 20.4e6 });
    expect(store.resonanceHz).toBe(2.87e9);
    expect(store.omegaHz).toBe(20.4e6);
  });
});

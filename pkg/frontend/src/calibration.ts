/** Calibration arithmetic shared by the experiment panels. */

import type { ExperimentDonePayload, FitResultJson } from "./types.js";

/** Electron gyromagnetic ratio (Hz/T) used for field inference. */
export const GAMMA_E = 28e9;

/** Pulse timing grid of the sequencer (s); durations snap to it. */
export const TIME_GRID = 0.25e-9;

export function snapTime(seconds: number): number {
  return Math.round(seconds / TIME_GRID) * TIME_GRID;
}

/** pi and pi/2 pulse durations for a Rabi frequency (Hz), grid-snapped. */
export function pulseDurations(omegaHz: number): {
  tauPi: number;
  tauPi2: number;
} {
  if (!(omegaHz > 0)) throw new Error("omega must be > 0");
  return {
    tauPi: snapTime(1 / (2 * omegaHz)),
    tauPi2: snapTime(1 / (4 * omegaHz)),
  };
}

/** Axial field (T) from the two fitted dip centers (Hz). */
export function bzFromSplitting(fPlus: number, fMinus: number): number {
  if (fPlus < fMinus) throw new Error("expected fPlus >= fMinus");
  return (fPlus - fMinus) / (2 * GAMMA_E);
}

export interface CalibrationStore {
  /** MW resonance frequency (Hz) adopted from an ODMR fit. */
  resonanceHz?: number;
  /** Rabi frequency (Hz) adopted from a Rabi fit. */
  omegaHz?: number;
  /** Derived pulse durations (s), auto-filled when omega is adopted. */
  tauPiS?: number;
  tauPi2S?: number;
  /** Inferred axial field (T) from an ODMR splitting. */
  bzT?: number;
}

function converged(fits: FitResultJson[]): FitResultJson | null {
  for (let i = fits.length - 1; i >= 0; i--) {
    if (fits[i].converged) return fits[i];
  }
  return null;
}

/**
 * Calibration values a completed experiment offers for adoption.
 * Only converged fits contribute; a failed fit offers nothing.
 */
export function offeredCalibration(
  done: ExperimentDonePayload,
): Partial<CalibrationStore> {
  const fit = converged(done.fits);
  if (!fit) return {};
  if (done.kind === "odmr") {
    const centers = (done.metadata["dip_centers_hz"] as number[]) ?? [];
    const out: Partial<CalibrationStore> = {};
    if (centers.length === 1) out.resonanceHz = centers[0];
    if (centers.length === 2) {
      out.resonanceHz = (centers[0] + centers[1]) / 2;
      out.bzT = bzFromSplitting(centers[1], centers[0]);
    }
    const inferred = done.metadata["inferred_bz_t"];
    if (typeof inferred === "number") out.bzT = inferred;
    return out;
  }
  if (done.kind === "rabi") {
    const omega = fit.parameters["omega"];
    if (!omega) return {};
    const { tauPi, tauPi2 } = pulseDurations(omega[0]);
    return { omegaHz: omega[0], tauPiS: tauPi, tauPi2S: tauPi2 };
  }
  return {};
}

/** Merge an adopted offering into the store (operator-confirmed). */
export function adopt(
  store: CalibrationStore,
  offered: Partial<CalibrationStore>,
): CalibrationStore {
  return { ...store, ...offered };
}

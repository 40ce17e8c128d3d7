/**
 * The view model is a pure function of the service event stream plus
 * explicit local actions: replaying a recorded event log reproduces the
 * identical ViewState. No rendering or network code lives here.
 */

import type {
  ExperimentDonePayload,
  ExperimentKind,
  InstrumentSnapshot,
  SessionEvent,
} from "./types.js";
import { adopt, offeredCalibration } from "./calibration.js";
import type { CalibrationStore } from "./calibration.js";

export interface SweepPoint {
  index: number;
  x: number;
  y: number;
  reference?: number;
}

export interface ActiveExperiment {
  id: string;
  kind: ExperimentKind;
  params: Record<string, unknown>;
  done: number;
  total: number;
  /** Sweep points accepted strictly in index order. */
  points: SweepPoint[];
  /** Scan rows keyed by row index (serpentine order preserved). */
  scanRows: Map<number, number[]>;
}

export interface ScanView {
  region: [[number, number], [number, number]] | null;
  resolution: number | null;
  /** Progressive row buffer (null until the row arrives). */
  rows: (number[] | null)[];
  crosshair: { x: number; y: number } | null;
  zoom: number;
}

export interface ViewState {
  connection: "connecting" | "open" | "closed";
  lastSeq: number;
  instrument: InstrumentSnapshot | null;
  active: ActiveExperiment | null;
  lastResult: ExperimentDonePayload | null;
  resultsByKind: Partial<Record<ExperimentKind, ExperimentDonePayload>>;
  scan: ScanView;
  calibration: CalibrationStore;
  banner: string | null;
}

export function initialState(): ViewState {
  return {
    connection: "connecting",
    lastSeq: 0,
    instrument: null,
    active: null,
    lastResult: null,
    resultsByKind: {},
    scan: { region: null, resolution: null, rows: [], crosshair: null, zoom: 1 },
    calibration: {},
    banner: null,
  };
}

/** Experiment controls are disabled while any job holds the lease. */
export function controlsEnabled(state: ViewState): boolean {
  return state.connection === "open" && state.active === null;
}

function asPoint(index: number, payload: Record<string, unknown>): SweepPoint | null {
  const counts = payload["counts"];
  if (typeof counts !== "number") return null;
  const x = payload["tau"] ?? payload["frequency"];
  if (typeof x !== "number") return null;
  const p: SweepPoint = { index, x, y: counts };
  if (typeof payload["reference"] === "number") {
    p.reference = payload["reference"] as number;
  }
  return p;
}

/** Apply one service event. Unknown, stale, or out-of-order input is a no-op. */
export function applyEvent(state: ViewState, event: SessionEvent): ViewState {
  if (event.seq <= state.lastSeq) return state; // stale or duplicated
  const next: ViewState = { ...state, lastSeq: event.seq };
  const payload = event.payload;

  switch (event.kind) {
    case "state_changed": {
      next.instrument = payload as unknown as InstrumentSnapshot;
      return next;
    }

    case "experiment_started": {
      const kind = payload["kind"] as ExperimentKind;
      const params = (payload["params"] as Record<string, unknown>) ?? {};
      next.active = {
        id: String(payload["experiment_id"]),
        kind,
        params,
        done: 0,
        total: 0,
        points: [],
        scanRows: new Map(),
      };
      if (kind === "scan") {
        const region = params["region"] as [[number, number], [number, number]];
        const resolution = params["resolution"] as number;
        const [, [y0, y1]] = region;
        const ny = Math.round((y1 - y0) / resolution) + 1;
        next.scan = {
          ...state.scan,
          region,
          resolution,
          rows: new Array(ny).fill(null),
        };
      }
      return next;
    }

    case "progress": {
      if (!state.active || payload["experiment_id"] !== state.active.id) {
        return next;
      }
      next.active = {
        ...state.active,
        done: payload["done"] as number,
        total: payload["total"] as number,
      };
      return next;
    }

    case "point_ready": {
      const active = next.active ?? state.active;
      if (!active || payload["experiment_id"] !== active.id) return next;
      const index = payload["index"] as number;
      if (active.kind === "scan") {
        const row = payload["row"] as number;
        const counts = payload["counts"] as number[];
        if (typeof row !== "number" || !Array.isArray(counts)) return next;
        const scanRows = new Map(active.scanRows);
        scanRows.set(row, counts);
        next.active = { ...active, scanRows };
        const rows = state.scan.rows.slice();
        if (row >= 0 && row < rows.length) rows[row] = counts;
        next.scan = { ...next.scan, rows };
        return next;
      }
      // never render a sweep point out of order
      if (index !== active.points.length) return next;
      const p = asPoint(index, payload);
      if (!p) return next;
      next.active = { ...active, points: [...active.points, p] };
      return next;
    }

    case "experiment_done": {
      const done = payload as unknown as ExperimentDonePayload;
      if (state.active && done.experiment_id === state.active.id) {
        next.active = null;
      }
      next.lastResult = done;
      next.resultsByKind = { ...state.resultsByKind, [done.kind]: done };
      return next;
    }

    case "error": {
      if (state.active && payload["experiment_id"] === state.active.id) {
        next.active = null;
      }
      next.banner = String(payload["message"] ?? "experiment failed");
      return next;
    }

    default:
      return next;
  }
}

/** Fold a whole recorded event log (replay equals the live run). */
export function replay(events: SessionEvent[], from?: ViewState): ViewState {
  let state = from ?? initialState();
  for (const ev of events) state = applyEvent(state, ev);
  return state;
}

// --- local (operator) actions ------------------------------------------------

export function setConnection(
  state: ViewState,
  connection: ViewState["connection"],
): ViewState {
  const banner =
    connection === "closed" ? "connection to the instrument lost" : null;
  return { ...state, connection, banner };
}

/** Move the crosshair, clamped to the scan extent. */
export function setCrosshair(state: ViewState, x: number, y: number): ViewState {
  const region = state.scan.region;
  if (!region) return state;
  const [[x0, x1], [y0, y1]] = region;
  const cx = Math.min(Math.max(x, x0), x1);
  const cy = Math.min(Math.max(y, y0), y1);
  return { ...state, scan: { ...state.scan, crosshair: { x: cx, y: cy } } };
}

export function setZoom(state: ViewState, zoom: number): ViewState {
  return { ...state, scan: { ...state.scan, zoom: Math.max(zoom, 1) } };
}

/**
 * Adopt calibration values from a completed experiment (explicit operator
 * confirmation). Values only ever come from converged fits.
 */
export function adoptCalibration(
  state: ViewState,
  done: ExperimentDonePayload,
): ViewState {
  const offered = offeredCalibration(done);
  if (Object.keys(offered).length === 0) return state;
  return { ...state, calibration: adopt(state.calibration, offered) };
}

export function clearBanner(state: ViewState): ViewState {
  return { ...state, banner: null };
}

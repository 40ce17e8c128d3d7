import { describe, expect, it } from "vitest";
import {
  adoptCalibration,
  applyEvent,
  clearBanner,
  controlsEnabled,
  initialState,
  replay,
  setConnection,
  setCrosshair,
  setZoom,
} from "../src/reducer.js";
import type { SessionEvent } from "../src/types.js";

let seq = 0;

function ev(kind: SessionEvent["kind"], payload: Record<string, unknown>): SessionEvent {
  seq += 1;
  return { seq, kind, payload };
}

function scanSession(): SessionEvent[] {
  seq = 0;
  const region = [
    [49, 51],
    [49, 51],
  ];
  const events: SessionEvent[] = [
    ev("state_changed", {
      stage_voltage: [5, 5, 5],
      stage_position_um: [50, 50, 50],
      sample: "single_nv",
      lease_holder: null,
    }),
    ev("experiment_started", {
      experiment_id: "job-0001",
      kind: "scan",
      params: { region, resolution: 1.0, dwell: 0.001 },
    }),
  ];
  for (let row = 0; row < 3; row++) {
    events.push(
      ev("progress", { experiment_id: "job-0001", done: row + 1, total: 3 }),
      ev("point_ready", {
        experiment_id: "job-0001",
        index: row,
        total: 3,
        row,
        counts: [row, row + 1, row + 2],
      }),
    );
  }
  events.push(
    ev("experiment_done", {
      experiment_id: "job-0001",
      kind: "scan",
      dataset_id: "ds-0001",
      aborted: false,
      fits: [],
      metadata: {},
    }),
  );
  return events;
}

describe("event reducer", () => {
  it("tracks a scan session progressively", () => {
    const events = scanSession();
    let state = initialState();
    state = applyEvent(state, events[0]);
    expect(state.instrument?.stage_position_um).toEqual([50, 50, 50]);

    state = applyEvent(state, events[1]);
    expect(state.active?.kind).toBe("scan");
    expect(state.scan.rows).toEqual([null, null, null]);
    expect(controlsEnabled(setConnection(state, "open"))).toBe(false);

    state = applyEvent(state, events[2]); // progress row 0
    state = applyEvent(state, events[3]); // point_ready row 0
    expect(state.scan.rows[0]).toEqual([0, 1, 2]);
    expect(state.scan.rows[1]).toBeNull();

    for (const e of events.slice(4)) state = applyEvent(state, e);
    expect(state.active).toBeNull();
    expect(state.scan.rows[2]).toEqual([2, 3, 4]);
    expect(state.lastResult?.dataset_id).toBe("ds-0001");
    expect(state.resultsByKind["scan"]?.dataset_id).toBe("ds-0001");
  });

  it("ignores stale or duplicated sequence numbers", () => {
    const events = scanSession();
    let state = replay(events.slice(0, 4));
    const before = state;
    state = applyEvent(state, events[1]); // replayed old event
    expect(state).toBe(before);
    state = applyEvent(state, { ...events[3], seq: events[3].seq });
    expect(state).toBe(before);
  });

  it("never renders a sweep point out of order", () => {
    seq = 0;
    let state = initialState();
    state = applyEvent(
      state,
      ev("experiment_started", {
        experiment_id: "job-0002",
        kind: "rabi",
        params: { points: 3 },
      }),
    );
    state = applyEvent(
      state,
      ev("point_ready", {
        experiment_id: "job-0002",
        index: 1, // skipped index 0
        total: 3,
        tau: 10e-9,
        counts: 5000,
        reference: 6000,
      }),
    );
    expect(state.active?.points).toHaveLength(0);
    state = applyEvent(
      state,
      ev("point_ready", {
        experiment_id: "job-0002",
        index: 0,
        total: 3,
        tau: 0,
        counts: 6100,
        reference: 6000,
      }),
    );
    expect(state.active?.points).toHaveLength(1);
    expect(state.active?.points[0]).toMatchObject({ index: 0, x: 0, y: 6100 });
  });

  it("an error event clears the active run and raises a banner", () => {
    seq = 0;
    let state = initialState();
    state = applyEvent(
      state,
      ev("experiment_started", {
        experiment_id: "job-0003",
        kind: "odmr",
        params: {},
      }),
    );
    state = applyEvent(
      state,
      ev("error", { experiment_id: "job-0003", message: "stage out of range" }),
    );
    expect(state.active).toBeNull();
    expect(state.banner).toContain("stage out of range");
    expect(clearBanner(state).banner).toBeNull();
  });

  it("clamps the crosshair to the scanned region", () => {
    let state = replay(scanSession());
    state = setCrosshair(state, 100, -3);
    expect(state.scan.crosshair).toEqual({ x: 51, y: 49 });
    expect(setZoom(state, 0.1).scan.zoom).toBe(1);
  });

  it("adopting a rabi result fills omega and the pulse durations", () => {
    seq = 0;
    let state = initialState();
    const done = {
      experiment_id: "job-0004",
      kind: "rabi",
      dataset_id: "ds-0002",
      aborted: false,
      fits: [
        {
          model: "rabi_eq4",
          parameters: {
            a: [0.1, 0.001] as [number, number],
            omega: [20.4e6, 1e4] as [number, number],
            phi: [0, 0.01] as [number, number],
            t2_star: [320e-9, 1e-8] as [number, number],
            c: [0.9, 0.001] as [number, number],
          },
          residual_norm: 0.5,
          converged: true,
          n_iter: 9,
        },
      ],
      metadata: { tau_pi: 24.5e-9, tau_pi_2: 12.25e-9 },
    } as const;
    state = applyEvent(
      state,
      ev("experiment_done", done as unknown as Record<string, unknown>),
    );
    state = adoptCalibration(state, state.lastResult!);
    expect(state.calibration.omegaHz).toBeCloseTo(20.4e6, 0);
    expect(state.calibration.tauPiS).toBeCloseTo(24.5e-9, 12);
    expect(state.calibration.tauPi2S).toBeCloseTo(12.25e-9, 12);
  });

  it("replaying the recorded event log reproduces the live view state", () => {
    const events = scanSession();
    let live = initialState();
    for (const e of events) live = applyEvent(live, e);
    const replayed = replay(events);
    expect(replayed).toEqual(live);
  });
});

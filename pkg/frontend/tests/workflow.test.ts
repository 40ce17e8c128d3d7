/**
 * Scripted operator session against the live service:
 * scan -> click-to-move -> ODMR -> adopt -> Rabi -> adopt -> Hahn,
 * driving the same reducer the UI renders from and checking at the end
 * that replaying the recorded event log reproduces the live view state.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import WebSocket from "ws";

import { ServiceClient } from "../src/client.js";
import { snapTime } from "../src/calibration.js";
import { clickToVoltages } from "../src/stageMap.js";
import {
  ViewState,
  adoptCalibration,
  applyEvent,
  initialState,
  replay,
} from "../src/reducer.js";
import type { ExperimentDonePayload, SessionEvent } from "../src/types.js";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as { port: number }).port;
      srv.close(() => resolve(port));
    });
    srv.on("error", reject);
  });
}

async function waitFor<T>(
  probe: () => T | null | undefined | false,
  what: string,
  timeoutMs = 90_000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = probe();
    if (value) return value;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

describe("scripted operator workflow", () => {
  let proc: ChildProcess;
  let dataDir: string;
  let client: ServiceClient;
  let sock: WebSocket;
  let stderr = "";

  let live: ViewState = initialState();
  const log: SessionEvent[] = [];

  beforeAll(async () => {
    const port = await freePort();
    dataDir = mkdtempSync(join(tmpdir(), "nvlab-ui-"));
    proc = spawn(
      "python3",
      ["-m", "nvlab.cli", "serve", "--port", String(port),
       "--data-dir", dataDir],
      { stdio: ["ignore", "ignore", "pipe"] },
    );
    proc.stderr!.on("data", (chunk) => (stderr += chunk));

    const base = `http://127.0.0.1:${port}`;
    client = new ServiceClient(base);
    const deadline = Date.now() + 30_000;
    for (;;) {
      try {
        await client.getConfig();
        break;
      } catch {
        if (Date.now() > deadline) {
          throw new Error(`service never came up: ${stderr}`);
        }
        await new Promise((r) => setTimeout(r, 100));
      }
    }

    sock = new WebSocket(`ws://127.0.0.1:${port}/api/events`);
    sock.on("message", (data) => {
      const event = JSON.parse(String(data)) as SessionEvent;
      log.push(event);
      live = applyEvent(live, event);
    });
    await waitFor(() => live.instrument, "greeting snapshot");
  }, 60_000);

  afterAll(() => {
    sock?.close();
    proc?.kill();
    rmSync(dataDir, { recursive: true, force: true });
  });

  async function runToCompletion(
    kind: Parameters<ServiceClient["startExperiment"]>[0],
    params: Record<string, unknown>,
  ): Promise<ExperimentDonePayload> {
    const before = live.lastResult;
    const job = await client.startExperiment(kind, params);
    const done = await waitFor(
      () =>
        live.lastResult !== before &&
        live.lastResult?.experiment_id === job.id
          ? live.lastResult
          : null,
      `${kind} completion`,
    );
    expect(done.kind).toBe(kind);
    expect(done.aborted).toBe(false);
    return done;
  }

  it("runs scan, click-to-move, ODMR, Rabi, and Hahn with adoption", async () => {
    // a static field along the NV axis splits the ODMR line
    await client.putState({ magnet_field: [0, 0, 356e-6] });

    // --- confocal scan around the current focus --------------------------
    const resolution = 0.25;
    await runToCompletion("scan", {
      region: [
        [48, 52],
        [48, 52],
      ],
      resolution,
      dwell: 0.003,
    });
    const rows = live.scan.rows;
    expect(rows.every((r) => r !== null)).toBe(true);
    let best = { iy: 0, ix: 0, counts: -1 };
    rows.forEach((row, iy) =>
      row!.forEach((c, ix) => {
        if (c > best.counts) best = { iy, ix, counts: c };
      }),
    );
    const region = live.scan.region!;
    const spotX = region[0][0] + best.ix * resolution;
    const spotY = region[1][0] + best.iy * resolution;
    expect(Math.abs(spotX - 50)).toBeLessThanOrEqual(resolution);
    expect(Math.abs(spotY - 50)).toBeLessThanOrEqual(resolution);

    // --- click-to-move through the inverse stage map ----------------------
    const volts = clickToVoltages(spotX, spotY, live.instrument!.stage_voltage);
    await client.moveStage(volts);
    const inst = await waitFor(
      () =>
        live.instrument &&
        Math.abs(live.instrument.stage_position_um[0] - spotX) < 1e-6
          ? live.instrument
          : null,
      "stage settled on the clicked spot",
    );
    expect(inst.stage_position_um[1]).toBeCloseTo(spotY, 6);

    // --- ODMR and calibration adoption ------------------------------------
    const odmr = await runToCompletion("odmr", {
      f_start: 2.845e9,
      f_stop: 2.895e9,
      points: 151,
      repeats: 1024,
    });
    const centers = odmr.metadata["dip_centers_hz"] as number[];
    expect(centers).toHaveLength(2);
    const bz = odmr.metadata["inferred_bz_t"] as number;
    expect(Math.abs(bz - 356e-6)).toBeLessThan(10e-6);

    live = adoptCalibration(live, odmr);
    expect(live.calibration.resonanceHz! / 1e9).toBeCloseTo(2.87, 3);
    expect(live.calibration.bzT).toBeCloseTo(bz, 12);

    // --- Rabi on the upper transition, then adopt the drive ---------------
    const rabi = await runToCompletion("rabi", {
      tau_start: 0,
      tau_stop: 400e-9,
      points: 61,
      mw_frequency: centers[1],
      omega: 20.4e6,
      shots: 50_000,
    });
    const rabiFit = rabi.fits[rabi.fits.length - 1];
    expect(rabiFit.converged).toBe(true);

    live = adoptCalibration(live, rabi);
    const omegaHz = live.calibration.omegaHz!;
    expect(omegaHz / 1e6).toBeGreaterThan(17);
    expect(omegaHz / 1e6).toBeLessThan(24);
    // adopting omega auto-fills both pulse durations on the timing grid
    expect(live.calibration.tauPiS).toBeCloseTo(snapTime(1 / (2 * omegaHz)), 15);
    expect(live.calibration.tauPi2S).toBeCloseTo(snapTime(1 / (4 * omegaHz)), 15);

    // --- Hahn echo with the adopted calibration ----------------------------
    const hahn = await runToCompletion("hahn", {
      tau_start: 100e-9,
      tau_stop: 1.2e-6,
      points: 10,
      omega: omegaHz,
      mw_frequency: centers[1],
      shots: 200_000,
      n_noise: 256,
    });
    const hahnFit = hahn.fits[hahn.fits.length - 1];
    expect(hahnFit.converged).toBe(true);
    const t2 = hahnFit.parameters["tau"][0];
    expect(t2).toBeGreaterThan(0.3e-6);
    expect(t2).toBeLessThan(3e-6);

    // --- replaying the recorded log reproduces the live view state --------
    const replayed = adoptCalibration(
      adoptCalibration(replay(log), odmr),
      rabi,
    );
    expect(replayed).toEqual(live);
  }, 240_000);
});

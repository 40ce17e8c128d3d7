/**
 * Operator console wiring: one event-stream subscription drives the pure
 * reducer; DOM rendering reads the resulting ViewState. All instrument
 * mutations go through the ServiceClient (documented endpoints only).
 */

import { ServiceClient } from "./client.js";
import type { WebSocketCtor } from "./client.js";
import {
  ViewState,
  adoptCalibration,
  applyEvent,
  controlsEnabled,
  initialState,
  setConnection,
  setCrosshair,
} from "./reducer.js";
import { ThrottledScale, rowsToRgba } from "./colorScale.js";
import { clickToVoltages, pixelToUm } from "./stageMap.js";
import { evalFitModel, fitGrid, renderPlot } from "./plot.js";
import type { ExperimentDonePayload, ExperimentKind, SessionEvent } from "./types.js";

interface PanelSpec {
  kind: ExperimentKind;
  title: string;
  fields: { name: string; label: string; value: string }[];
}

const PANELS: PanelSpec[] = [
  {
    kind: "odmr",
    title: "ODMR",
    fields: [
      { name: "f_start", label: "f start (Hz)", value: "2.845e9" },
      { name: "f_stop", label: "f stop (Hz)", value: "2.895e9" },
      { name: "points", label: "points", value: "151" },
      { name: "repeats", label: "repeats", value: "512" },
    ],
  },
  {
    kind: "rabi",
    title: "Rabi",
    fields: [
      { name: "tau_start", label: "tau start (s)", value: "0" },
      { name: "tau_stop", label: "tau stop (s)", value: "400e-9" },
      { name: "points", label: "points", value: "81" },
      { name: "mw_frequency", label: "MW freq (Hz)", value: "2.87e9" },
      { name: "omega", label: "drive Omega (Hz)", value: "20.4e6" },
      { name: "shots", label: "shots", value: "100000" },
    ],
  },
  {
    kind: "readout",
    title: "Readout",
    fields: [
      { name: "pi_duration", label: "pi duration (s)", value: "24.5e-9" },
      { name: "shots", label: "shots", value: "300000" },
    ],
  },
  {
    kind: "lifetime",
    title: "Lifetime",
    fields: [{ name: "shots", label: "shots", value: "10000000" }],
  },
  {
    kind: "hahn",
    title: "Hahn echo",
    fields: [
      { name: "tau_start", label: "tau start (s)", value: "50e-9" },
      { name: "tau_stop", label: "tau stop (s)", value: "1.5e-6" },
      { name: "points", label: "points", value: "24" },
      { name: "omega", label: "Omega (Hz)", value: "20.4e6" },
      { name: "mw_frequency", label: "MW freq (Hz)", value: "2.87e9" },
      { name: "shots", label: "shots", value: "1000000" },
    ],
  },
];

export class OperatorApp {
  state: ViewState = initialState();
  /** Recorded event log; replaying it reproduces the current ViewState. */
  readonly eventLog: SessionEvent[] = [];
  private readonly scale = new ThrottledScale();
  private pending: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly client: ServiceClient,
    private readonly root: HTMLElement,
    private readonly WS: WebSocketCtor,
  ) {}

  start(): void {
    this.buildDom();
    this.client.openEvents(
      this.WS,
      (ev) => {
        this.eventLog.push(ev);
        this.state = applyEvent(this.state, ev);
        if (this.state.connection !== "open") {
          this.state = setConnection(this.state, "open");
        }
        this.render();
      },
      () => {
        this.state = setConnection(this.state, "closed");
        this.render();
      },
    );
  }

  /** Outbound commands are serialized per session. */
  private enqueue(fn: () => Promise<unknown>): void {
    this.pending = this.pending.then(fn).catch((err) => {
      this.state = { ...this.state, banner: String(err?.message ?? err) };
      this.render();
    });
  }

  private buildDom(): void {
    this.root.innerHTML = `
      <div id="banner" class="banner" hidden></div>
      <section class="panel" id="scan-panel">
        <h2>Scan</h2>
        <canvas id="heatmap" width="400" height="400"></canvas>
        <div id="crosshair-info"></div>
        <button id="scan-start">Start scan</button>
        <button id="scan-refine">Refine</button>
        <button id="scan-abort">Abort</button>
      </section>
      <div id="panels"></div>
      <section class="panel" id="calibration">
        <h2>Calibration</h2>
        <dl id="cal-values"></dl>
      </section>`;
    const panels = this.root.querySelector("#panels")!;
    for (const spec of PANELS) {
      const sec = document.createElement("section");
      sec.className = "panel";
      sec.id = `panel-${spec.kind}`;
      sec.innerHTML = `
        <h2>${spec.title}</h2>
        <form>${spec.fields
          .map(
            (f) =>
              `<label>${f.label}
                 <input name="${f.name}" value="${f.value}"></label>`,
          )
          .join("")}</form>
        <button class="start">Start</button>
        <button class="abort">Abort</button>
        <button class="adopt" hidden>Adopt calibration</button>
        <div class="fit-summary"></div>
        <div class="plot"></div>`;
      sec.querySelector(".start")!.addEventListener("click", () =>
        this.startExperiment(spec),
      );
      sec.querySelector(".abort")!.addEventListener("click", () =>
        this.abortActive(),
      );
      sec.querySelector(".adopt")!.addEventListener("click", () =>
        this.adoptFrom(spec.kind),
      );
      panels.appendChild(sec);
    }
    const canvas = this.root.querySelector<HTMLCanvasElement>("#heatmap")!;
    canvas.addEventListener("click", (ev) => this.onHeatmapClick(ev));
    this.root
      .querySelector("#scan-start")!
      .addEventListener("click", () => this.startScan(2.0, 0.05));
    this.root
      .querySelector("#scan-refine")!
      .addEventListener("click", () => this.startScan(0.5, 0.02));
    this.root
      .querySelector("#scan-abort")!
      .addEventListener("click", () => this.abortActive());
  }

  private startScan(spanUm: number, resolution: number): void {
    const pos = this.state.instrument?.stage_position_um ?? [50, 50, 50];
    const region = [
      [pos[0] - spanUm / 2, pos[0] + spanUm / 2],
      [pos[1] - spanUm / 2, pos[1] + spanUm / 2],
    ];
    this.enqueue(() =>
      this.client.startExperiment("scan", { region, resolution }),
    );
  }

  private startExperiment(spec: PanelSpec): void {
    if (!controlsEnabled(this.state)) return;
    const form = this.root.querySelector<HTMLFormElement>(
      `#panel-${spec.kind} form`,
    )!;
    const params: Record<string, unknown> = {};
    for (const f of spec.fields) {
      const input = form.elements.namedItem(f.name) as HTMLInputElement;
      params[f.name] = Number(input.value);
    }
    if (spec.kind === "odmr") {
      params["dwell"] = 10e-3;
      params["laser_power"] = 2.6333e-3;
      params["omega"] = 0.9438e6;
    }
    this.enqueue(() => this.client.startExperiment(spec.kind, params));
  }

  private abortActive(): void {
    const active = this.state.active;
    if (!active) return;
    this.enqueue(() => this.client.abortExperiment(active.id));
  }

  private adoptFrom(kind: ExperimentKind): void {
    const done = this.state.resultsByKind[kind];
    if (!done) return;
    this.state = adoptCalibration(this.state, done);
    this.applyAdoptedToForms();
    this.render();
  }

  /** Rabi's adopted Omega auto-fills the Hahn pulse durations. */
  private applyAdoptedToForms(): void {
    const cal = this.state.calibration;
    const setField = (panel: string, name: string, value: number) => {
      const input = this.root.querySelector<HTMLInputElement>(
        `#panel-${panel} input[name="${name}"]`,
      );
      if (input) input.value = String(value);
    };
    if (cal.omegaHz !== undefined) {
      setField("hahn", "omega", cal.omegaHz);
      setField("rabi", "omega", cal.omegaHz);
    }
    if (cal.resonanceHz !== undefined) {
      setField("rabi", "mw_frequency", cal.resonanceHz);
      setField("hahn", "mw_frequency", cal.resonanceHz);
    }
  }

  private onHeatmapClick(ev: MouseEvent): void {
    const region = this.state.scan.region;
    const inst = this.state.instrument;
    if (!region || !inst) return;
    const canvas = ev.currentTarget as HTMLCanvasElement;
    const rect = canvas.getBoundingClientRect();
    const { x, y } = pixelToUm(
      ev.clientX - rect.left,
      ev.clientY - rect.top,
      rect.width,
      rect.height,
      region,
    );
    this.state = setCrosshair(this.state, x, y);
    const volts = clickToVoltages(x, y, inst.stage_voltage);
    this.enqueue(() => this.client.moveStage(volts));
    this.render();
  }

  render(): void {
    const banner = this.root.querySelector<HTMLElement>("#banner")!;
    banner.hidden = this.state.banner === null;
    banner.textContent = this.state.banner ?? "";

    this.renderHeatmap();
    const enabled = controlsEnabled(this.state);
    for (const spec of PANELS) {
      const sec = this.root.querySelector(`#panel-${spec.kind}`)!;
      (sec.querySelector(".start") as HTMLButtonElement).disabled = !enabled;
      const done = this.state.resultsByKind[spec.kind];
      const adoptBtn = sec.querySelector(".adopt") as HTMLButtonElement;
      adoptBtn.hidden = !done || done.fits.every((f) => !f.converged);
      this.renderPanelResult(spec.kind, done);
    }
    this.renderCalibration();
  }

  private renderHeatmap(): void {
    const canvas = this.root.querySelector<HTMLCanvasElement>("#heatmap");
    const { rows, region } = this.state.scan;
    if (!canvas || !region || rows.length === 0) return;
    const nx = rows.find((r) => r !== null)?.length ?? 0;
    if (nx === 0) return;
    const flat = rows.flatMap((r) => r ?? []);
    const scale = this.scale.update(flat);
    const rgba = rowsToRgba(rows, nx, scale);
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    canvas.width = nx;
    canvas.height = rows.length;
    const img = ctx.createImageData(nx, rows.length);
    img.data.set(rgba);
    ctx.putImageData(img, 0, 0);
    const info = this.root.querySelector("#crosshair-info")!;
    const ch = this.state.scan.crosshair;
    info.textContent = ch
      ? `crosshair ${ch.x.toFixed(3)}, ${ch.y.toFixed(3)} um`
      : "";
  }

  private renderPanelResult(
    kind: ExperimentKind,
    done: ExperimentDonePayload | undefined,
  ): void {
    const sec = this.root.querySelector(`#panel-${kind}`)!;
    const summary = sec.querySelector(".fit-summary")!;
    const plotDiv = sec.querySelector(".plot")!;
    const active = this.state.active;
    const livePoints =
      active && active.kind === kind ? active.points : null;
    if (livePoints && livePoints.length > 1) {
      plotDiv.innerHTML = renderPlot([
        {
          x: livePoints.map((p) => p.x),
          y: livePoints.map((p) => p.y),
          color: "#4477aa",
        },
      ]);
    }
    if (!done) return;
    const fit = [...done.fits].reverse().find((f) => f.converged);
    if (!fit) {
      summary.innerHTML = `<span class="badge-failed">fit failed</span>`;
      return;
    }
    const lines: string[] = [];
    if (done.aborted) lines.push("aborted (partial data)");
    if (kind === "odmr") {
      const centers = (done.metadata["dip_centers_hz"] as number[]) ?? [];
      if (centers.length === 2) {
        const split = (centers[1] - centers[0]) / 1e6;
        lines.push(`splitting ${split.toFixed(2)} MHz`);
      }
      const bz = done.metadata["inferred_bz_t"];
      if (typeof bz === "number") {
        lines.push(`Bz = ${(bz / 1e-6).toFixed(1)} uT`);
      }
    }
    if (kind === "rabi") {
      const omega = fit.parameters["omega"]?.[0];
      if (omega) lines.push(`Omega = ${(omega / 1e6).toFixed(2)} MHz`);
      const tp = done.metadata["tau_pi"];
      if (typeof tp === "number") {
        lines.push(`tau_pi = ${(tp / 1e-9).toFixed(2)} ns`);
      }
    }
    if (kind === "hahn") {
      const tau = fit.parameters["tau"]?.[0];
      if (tau) lines.push(`T2 = ${(tau / 1e-9).toFixed(0)} ns`);
    }
    if (kind === "lifetime") {
      const tau = fit.parameters["tau"]?.[0];
      if (tau) lines.push(`lifetime = ${(tau / 1e-9).toFixed(2)} ns`);
    }
    summary.textContent = lines.join("; ");
    if (livePoints && livePoints.length > 1) {
      const xs = livePoints.map((p) => p.x);
      const grid = fitGrid(xs);
      plotDiv.innerHTML = renderPlot([
        { x: xs, y: livePoints.map((p) => p.y), color: "#4477aa" },
        { x: grid, y: evalFitModel(fit.model, fit.parameters, grid),
          color: "#cc3311", width: 2 },
      ]);
    }
  }

  private renderCalibration(): void {
    const dl = this.root.querySelector("#cal-values")!;
    const cal = this.state.calibration;
    const rows: string[] = [];
    if (cal.resonanceHz !== undefined) {
      rows.push(`<dt>resonance</dt><dd>${(cal.resonanceHz / 1e9).toFixed(6)} GHz</dd>`);
    }
    if (cal.bzT !== undefined) {
      rows.push(`<dt>Bz</dt><dd>${(cal.bzT / 1e-6).toFixed(1)} uT</dd>`);
    }
    if (cal.omegaHz !== undefined) {
      rows.push(`<dt>Omega</dt><dd>${(cal.omegaHz / 1e6).toFixed(2)} MHz</dd>`);
      rows.push(`<dt>tau_pi</dt><dd>${((cal.tauPiS ?? 0) / 1e-9).toFixed(2)} ns</dd>`);
      rows.push(`<dt>tau_pi/2</dt><dd>${((cal.tauPi2S ?? 0) / 1e-9).toFixed(2)} ns</dd>`);
    }
    dl.innerHTML = rows.join("");
  }
}

/** Browser entry point. */
export function mount(baseUrl: string, root: HTMLElement): OperatorApp {
  const client = new ServiceClient(baseUrl);
  const app = new OperatorApp(
    client,
    root,
    (globalThis as unknown as { WebSocket: WebSocketCtor }).WebSocket,
  );
  app.start();
  return app;
}

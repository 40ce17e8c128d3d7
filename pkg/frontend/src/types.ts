/** Wire types mirroring the service's documented JSON schemas. */

export type ExperimentKind =
  | "scan"
  | "odmr"
  | "rabi"
  | "ramsey"
  | "hahn"
  | "readout"
  | "lifetime";

export interface MWSettings {
  frequency: number;
  rabi: number;
  on: boolean;
}

export interface SPADConfig {
  dark_rate: number;
  dead_time: number;
  quantum_efficiency: number;
  collection_efficiency: number;
}

/** GET/PUT /api/state body and the state_changed event payload. */
export interface InstrumentSnapshot {
  stage_voltage: [number, number, number];
  stage_position_um: [number, number, number];
  laser_power: number;
  attenuation: number;
  mw: MWSettings;
  magnet_field: [number, number, number];
  spad: SPADConfig;
  seed: number;
  sample: string;
  lease_holder: string | null;
}

/** One message on the WS /api/events stream. */
export interface SessionEvent {
  seq: number;
  kind:
    | "state_changed"
    | "experiment_started"
    | "progress"
    | "point_ready"
    | "experiment_done"
    | "error";
  payload: Record<string, unknown>;
}

export interface FitResultJson {
  model: string;
  parameters: Record<string, [number, number]>;
  residual_norm: number;
  converged: boolean;
  n_iter: number;
}

export interface ExperimentDonePayload {
  experiment_id: string;
  kind: ExperimentKind;
  dataset_id: string;
  aborted: boolean;
  fits: FitResultJson[];
  metadata: Record<string, unknown>;
}

export interface JobDescriptor {
  id: string;
  kind: ExperimentKind;
  params: Record<string, unknown>;
  status: "running" | "done" | "aborted" | "error";
  dataset_id: string | null;
  error: string | null;
}

export interface AxisJson {
  name: string;
  unit: string;
  values: number[];
}

export interface DatasetJson {
  id?: string;
  kind: "scan2d" | "spectrum" | "time_trace" | "histogram" | "sweep";
  aborted: boolean;
  axes: AxisJson[];
  values: unknown; // nested number arrays, NaN -> null
  uncertainty: unknown | null;
  metadata: Record<string, unknown>;
  fits: FitResultJson[];
}

export interface ErrorBody {
  error: { code: string; message: string };
}

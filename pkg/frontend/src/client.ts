/**
 * Typed client for the instrument service. All instrument mutations go
 * through these documented endpoints; fetch and WebSocket constructors
 * are injected so the client runs in browsers and under Node tests.
 */

import type {
  DatasetJson,
  ErrorBody,
  ExperimentKind,
  InstrumentSnapshot,
  JobDescriptor,
  SessionEvent,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface EventSocket {
  close(): void;
}

export interface WebSocketLike {
  addEventListener(type: string, listener: (ev: unknown) => void): void;
  close(): void;
}

export type WebSocketCtor = new (url: string) => WebSocketLike;

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await res.json();
    if (!res.ok) {
      const err = body as ErrorBody;
      throw new ServiceError(
        res.status,
        err.error?.code ?? "unknown",
        err.error?.message ?? res.statusText,
      );
    }
    return body as T;
  }

  getConfig(): Promise<Record<string, unknown>> {
    return this.request("/api/config");
  }

  getState(): Promise<InstrumentSnapshot> {
    return this.request("/api/state");
  }

  putState(changes: Record<string, unknown>): Promise<InstrumentSnapshot> {
    return this.request("/api/state", {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(changes),
    });
  }

  /** Move the stage via the documented set-state endpoint. */
  moveStage(volts: [number, number, number]): Promise<InstrumentSnapshot> {
    return this.putState({ stage_voltage: volts });
  }

  loadSample(spec: Record<string, unknown>): Promise<InstrumentSnapshot> {
    return this.request("/api/sample", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(spec),
    });
  }

  startExperiment(
    kind: ExperimentKind,
    params: Record<string, unknown>,
  ): Promise<JobDescriptor> {
    return this.request("/api/experiments", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, params }),
    });
  }

  getExperiment(id: string): Promise<JobDescriptor> {
    return this.request(`/api/experiments/${id}`);
  }

  abortExperiment(id: string): Promise<{ id: string; aborting: boolean }> {
    return this.request(`/api/experiments/${id}/abort`, { method: "POST" });
  }

  listDatasets(): Promise<{ id: string; kind: string }[]> {
    return this.request("/api/datasets");
  }

  getDataset(id: string): Promise<DatasetJson> {
    return this.request(`/api/datasets/${id}`);
  }

  /**
   * Subscribe to the ordered event stream. Handlers run on the single
   * rendering thread; the socket constructor is injected.
   */
  openEvents(
    WS: WebSocketCtor,
    onEvent: (ev: SessionEvent) => void,
    onClose?: () => void,
  ): EventSocket {
    const wsUrl =
      this.baseUrl.replace(/^http/, "ws") + "/api/events";
    const sock = new WS(wsUrl);
    sock.addEventListener("message", (ev) => {
      const data = (ev as { data: unknown }).data;
      onEvent(JSON.parse(String(data)) as SessionEvent);
    });
    if (onClose) {
      sock.addEventListener("close", () => onClose());
    }
    return { close: () => sock.close() };
  }
}

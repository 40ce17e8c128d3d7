"""HTTP + WebSocket service exposing one virtual lab to clients.

Request/response endpoints (JSON bodies):

    GET  /api/config                  effective configuration echo
    GET  /api/state                   instrument snapshot
    PUT  /api/state                   partial state update (idempotent)
    POST /api/sample                  load a sample (config schema)
    GET  /api/experiments             list jobs
    POST /api/experiments             start {kind, params}; 409 on lease
    GET  /api/experiments/{id}        job status
    POST /api/experiments/{id}/abort  request abort (honored between points)
    GET  /api/datasets                dataset index
    GET  /api/datasets/{id}           dataset as JSON arrays
    GET  /api/datasets/{id}/file      raw container file

    WS   /api/events                  ordered SessionEvent stream

Error bodies are {"error": {"code", "message"}}; a second experiment
start while one is running gets code "lease_conflict" with status 409.
"""

import queue
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse
from starlette.concurrency import run_in_threadpool

from ..io import ConfigError, LabConfig, default_config, parse_sample
from ..vlab import LeaseError, MWSettings, SPADConfig
from .events import EventBus
from .manager import DatasetStore, ExperimentManager, RequestError


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code,
                                           "message": message}})


def _state_changes(snapshot: dict, body: dict) -> dict:
    """Translate a partial snapshot-shaped update into with_changes kwargs."""
    allowed = ("stage_voltage", "laser_power", "attenuation", "mw",
               "magnet_field", "spad")
    changes = {}
    for key, value in body.items():
        if key not in allowed:
            raise RequestError(f"unknown state field {key!r}")
        if key == "mw":
            merged = dict(snapshot["mw"])
            for k in value:
                if k not in merged:
                    raise RequestError(f"unknown state field 'mw.{k}'")
                merged[k] = value[k]
            changes["mw"] = MWSettings(**merged)
        elif key == "spad":
            merged = dict(snapshot["spad"])
            for k in value:
                if k not in merged:
                    raise RequestError(f"unknown state field 'spad.{k}'")
                merged[k] = value[k]
            changes["spad"] = SPADConfig(**merged)
        else:
            changes[key] = value
    return changes


def create_app(config: Optional[LabConfig] = None,
               data_dir: Optional[Path] = None) -> FastAPI:
    config = config if config is not None else default_config()
    lab = config.build_lab()
    bus = EventBus()
    store = DatasetStore(Path(data_dir) if data_dir is not None
                         else Path(tempfile.mkdtemp(prefix="nvlab-data-")))
    manager = ExperimentManager(lab, store, bus)
    app = FastAPI(title="nvlab", version="1")
    app.state.lab = lab
    app.state.bus = bus
    app.state.store = store
    app.state.manager = manager
    app.state.config = config

    @app.get("/api/config")
    def get_config():
        return config.effective()

    @app.get("/api/state")
    def get_state():
        return lab.snapshot()

    @app.put("/api/state")
    async def set_state(request: Request):
        body = await request.json()
        if not isinstance(body, dict):
            return _error(400, "invalid_request", "body must be an object")
        before = lab.snapshot()
        try:
            changes = _state_changes(before, body)
            if changes:
                lab.set_state(**changes)
        except (RequestError, ValueError, TypeError) as ex:
            return _error(400, "invalid_request", str(ex))
        after = lab.snapshot()
        if after != before:   # idempotent: no event for a no-op update
            bus.publish("state_changed", after)
        return after

    @app.post("/api/sample")
    async def load_sample(request: Request):
        body = await request.json()
        try:
            sample = parse_sample(body, config.physics)
        except ConfigError as ex:
            return _error(400, "invalid_request", str(ex))
        lab.load_sample(sample)
        snapshot = lab.snapshot()
        bus.publish("state_changed", snapshot)
        return snapshot

    @app.get("/api/experiments")
    def list_experiments():
        return [j.public() for j in manager.list()]

    @app.post("/api/experiments")
    async def start_experiment(request: Request):
        body = await request.json()
        if not isinstance(body, dict) or not isinstance(body.get("kind"), str):
            return _error(400, "invalid_request",
                          "body must be {kind, params}")
        params = body.get("params") or {}
        if not isinstance(params, dict):
            return _error(400, "invalid_request", "params must be an object")
        try:
            job = manager.start(body["kind"], params)
        except RequestError as ex:
            return _error(400, "invalid_request", str(ex))
        except LeaseError as ex:
            return _error(409, "lease_conflict", str(ex))
        return JSONResponse(status_code=202, content=job.public())

    @app.get("/api/experiments/{job_id}")
    def get_experiment(job_id: str):
        job = manager.get(job_id)
        if job is None:
            return _error(404, "not_found", f"no experiment {job_id!r}")
        return job.public()

    @app.post("/api/experiments/{job_id}/abort")
    def abort_experiment(job_id: str):
        if not manager.abort(job_id):
            return _error(404, "not_found", f"no experiment {job_id!r}")
        return {"aborting": job_id}

    @app.get("/api/datasets")
    def list_datasets():
        return store.list()

    @app.get("/api/datasets/{ds_id}")
    def get_dataset(ds_id: str):
        ds = store.load(ds_id)
        if ds is None:
            return _error(404, "not_found", f"no dataset {ds_id!r}")
        return {
            "id": ds_id,
            "kind": ds.kind,
            "aborted": ds.aborted,
            "axes": [{"name": a.name, "unit": a.unit,
                      "values": a.values.tolist()} for a in ds.axes],
            "values": np.where(np.isfinite(ds.values), ds.values,
                               None).tolist(),
            "uncertainty": (None if ds.uncertainty is None else
                            np.where(np.isfinite(ds.uncertainty),
                                     ds.uncertainty, None).tolist()),
            "metadata": ds.metadata,
            "fits": [f.to_dict() for f in ds.fits],
        }

    @app.get("/api/datasets/{ds_id}/file")
    def get_dataset_file(ds_id: str):
        path = store.path(ds_id)
        if path is None:
            return _error(404, "not_found", f"no dataset {ds_id!r}")
        return FileResponse(path, media_type="application/octet-stream",
                            filename=path.name)

    @app.websocket("/api/events")
    async def events(ws: WebSocket):
        await ws.accept()
        sub = bus.subscribe()
        sub.push("state_changed", lab.snapshot())   # greeting snapshot
        try:
            while sub.alive:
                try:
                    event = await run_in_threadpool(sub.queue.get, True, 0.2)
                except queue.Empty:
                    continue
                await ws.send_json(event)
            await ws.close(code=1008, reason="event buffer overflow")
        except WebSocketDisconnect:
            pass
        finally:
            bus.unsubscribe(sub)

    return app


def serve(config: Optional[LabConfig] = None, port: int = 8000,
          host: str = "127.0.0.1",
          data_dir: Optional[Path] = None) -> None:
    """Run the service until interrupted."""
    import uvicorn
    uvicorn.run(create_app(config, data_dir), host=host, port=port,
                log_level="warning")

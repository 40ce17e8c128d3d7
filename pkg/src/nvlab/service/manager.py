"""Experiment execution and dataset bookkeeping behind the service API.

One experiment runs at a time (enforced by the virtual lab's lease).
Each run executes on a worker thread, streams progress and per-point
events through the bus, persists its dataset (partial datasets included
when aborted), and finishes with an experiment_done event. Abort is a
flag checked between sweep points, so it takes effect at the next point
boundary.
"""

import itertools
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ..experiments import (Dataset, confocal_scan, cw_odmr, hahn_echo,
                           lifetime, rabi, ramsey, readout_contrast)
from ..io import load_dataset, save_dataset
from ..vlab import LeaseError, VirtualLab

# Per-kind allowed parameters; required ones have no default here.
_EXPERIMENTS: Dict[str, dict] = {
    "scan": {"region": None, "resolution": None, "dwell": 1e-3},
    "odmr": {"f_start": None, "f_stop": None, "points": None,
             "dwell": None, "repeats": 64, "laser_power": None,
             "omega": None, "n_noise": 16},
    "rabi": {"tau_start": None, "tau_stop": None, "points": None,
             "mw_frequency": None, "omega": None, "shots": 100_000,
             "n_noise": 16},
    "ramsey": {"tau_start": None, "tau_stop": None, "points": None,
               "mw_frequency": None, "omega": None, "shots": 100_000,
               "n_noise": 256},
    "hahn": {"tau_start": 50e-9, "tau_stop": 1.5e-6, "points": 24,
             "omega": 20.4e6, "mw_frequency": 2.87e9, "shots": 1_000_000,
             "n_noise": 1024, "stretched": False},
    "readout": {"pi_duration": None, "bin_width": 20e-9,
                "trace_length": 2e-6, "mw_frequency": 2.87e9,
                "omega": 20.4e6, "shots": 300_000},
    "lifetime": {"excitation": 1e-6, "bin_width": 250e-12,
                 "dark_window": 200e-9, "shots": 10_000_000},
}

_NO_ABORT = ("readout", "lifetime")   # single-point acquisitions

_REQUIRED_DEFAULTS = {
    "odmr": {"dwell": 10e-3, "laser_power": 2.6333e-3, "omega": 0.9438e6},
}


class RequestError(ValueError):
    """Malformed experiment request (unknown kind or parameter)."""


@dataclass
class ExperimentJob:
    id: str
    kind: str
    params: dict
    abort_event: threading.Event = field(default_factory=threading.Event)
    status: str = "running"       # running | done | aborted | error
    dataset_id: Optional[str] = None
    error: Optional[str] = None
    thread: Optional[threading.Thread] = None

    def public(self) -> dict:
        return {"id": self.id, "kind": self.kind, "params": self.params,
                "status": self.status, "dataset_id": self.dataset_id,
                "error": self.error}


class DatasetStore:
    """Datasets persisted under one directory, indexed by id."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._index: Dict[str, dict] = {}
        self._lock = threading.Lock()
        self._counter = itertools.count(1)

    def add(self, ds: Dataset) -> str:
        with self._lock:
            n = next(self._counter)
        experiment = ds.metadata.get("experiment", ds.kind)
        ds_id = f"{experiment}-{n:04d}"
        path = self.directory / f"{ds_id}.ds"
        save_dataset(ds, path)
        entry = {"id": ds_id, "kind": ds.kind, "experiment": experiment,
                 "aborted": ds.aborted, "path": str(path),
                 "created": time.time()}
        with self._lock:
            self._index[ds_id] = entry
        return ds_id

    def list(self) -> List[dict]:
        with self._lock:
            entries = sorted(self._index.values(), key=lambda e: e["id"])
        return [{k: v for k, v in e.items() if k != "path"} for e in entries]

    def path(self, ds_id: str) -> Optional[Path]:
        with self._lock:
            entry = self._index.get(ds_id)
        return Path(entry["path"]) if entry else None

    def load(self, ds_id: str) -> Optional[Dataset]:
        path = self.path(ds_id)
        return load_dataset(path) if path else None


def _build_params(kind: str, params: dict) -> dict:
    if kind not in _EXPERIMENTS:
        raise RequestError(f"unknown experiment kind {kind!r}")
    schema = _EXPERIMENTS[kind]
    for key in params:
        if key not in schema:
            raise RequestError(f"unknown parameter {key!r} for {kind}")
    merged = {}
    fallback = _REQUIRED_DEFAULTS.get(kind, {})
    for key, default in schema.items():
        if key in params:
            merged[key] = params[key]
        elif default is not None or key in fallback:
            merged[key] = fallback.get(key, default)
        else:
            raise RequestError(f"missing parameter {key!r} for {kind}")
    if kind == "scan":
        region = merged["region"]
        try:
            (x0, x1), (y0, y1) = region
            merged["region"] = ((float(x0), float(x1)),
                                (float(y0), float(y1)))
        except (TypeError, ValueError):
            raise RequestError("region must be [[x0, x1], [y0, y1]]") from None
    return merged


def run_experiment(kind: str, lab: VirtualLab, params: dict,
                   progress: Optional[Callable] = None,
                   should_abort: Optional[Callable[[], bool]] = None
                   ) -> Dataset:
    """Dispatch one validated experiment request against a lab."""
    merged = _build_params(kind, params)
    fn = {"scan": confocal_scan, "odmr": cw_odmr, "rabi": rabi,
          "ramsey": ramsey, "hahn": hahn_echo, "readout": readout_contrast,
          "lifetime": lifetime}[kind]
    if kind in _NO_ABORT:
        return fn(lab, **merged)
    return fn(lab, **merged, progress=progress, should_abort=should_abort)


class ExperimentManager:
    """Starts, tracks, and aborts experiment jobs on worker threads."""

    def __init__(self, lab: VirtualLab, store: DatasetStore, bus):
        self.lab = lab
        self.store = store
        self.bus = bus
        self._jobs: Dict[str, ExperimentJob] = {}
        self._lock = threading.Lock()
        self._counter = itertools.count(1)

    def start(self, kind: str, params: dict) -> ExperimentJob:
        merged = _build_params(kind, params)   # validate before leasing
        with self._lock:
            job_id = f"job-{next(self._counter):04d}"
        self.lab.acquire_lease(job_id)         # raises LeaseError if busy
        job = ExperimentJob(id=job_id, kind=kind, params=merged)
        with self._lock:
            self._jobs[job_id] = job
        job.thread = threading.Thread(target=self._run, args=(job,),
                                      daemon=True)
        job.thread.start()
        return job

    def get(self, job_id: str) -> Optional[ExperimentJob]:
        with self._lock:
            return self._jobs.get(job_id)

    def list(self) -> List[ExperimentJob]:
        with self._lock:
            return sorted(self._jobs.values(), key=lambda j: j.id)

    def abort(self, job_id: str) -> bool:
        job = self.get(job_id)
        if job is None:
            return False
        job.abort_event.set()
        return True

    def _run(self, job: ExperimentJob) -> None:
        def progress(done: int, total: int, info: dict) -> None:
            self.bus.publish("progress", {"experiment_id": job.id,
                                          "done": done, "total": total})
            self.bus.publish("point_ready", {"experiment_id": job.id,
                                             "index": done - 1,
                                             "total": total, **info})

        try:
            self.bus.publish("experiment_started",
                             {"experiment_id": job.id, "kind": job.kind,
                              "params": job.params})
            ds = run_experiment(job.kind, self.lab, job.params,
                                progress=progress,
                                should_abort=job.abort_event.is_set)
            job.dataset_id = self.store.add(ds)
            job.status = "aborted" if ds.aborted else "done"
            self.bus.publish("experiment_done", {
                "experiment_id": job.id, "kind": job.kind,
                "dataset_id": job.dataset_id, "aborted": ds.aborted,
                "fits": [f.to_dict() for f in ds.fits],
                "metadata": _summary_metadata(ds.metadata),
            })
        except Exception as ex:
            job.status = "error"
            job.error = str(ex)
            self.bus.publish("error", {"experiment_id": job.id,
                                       "message": str(ex)})
        finally:
            self.lab.release_lease(job.id)


def _summary_metadata(md: dict) -> dict:
    """Metadata without the bulky raw-count arrays (kept in the file)."""
    drop = ("raw_counts", "reference_counts", "difference",
            "total_free_evolution", "instrument", "sequence_source")
    return {k: v for k, v in md.items() if k not in drop}

"""Network service: HTTP endpoints plus the per-session event stream."""

from .app import create_app, serve
from .events import EVENT_KINDS, EventBus, Subscriber
from .manager import (DatasetStore, ExperimentJob, ExperimentManager,
                      RequestError, run_experiment)

__all__ = [
    "create_app", "serve",
    "EVENT_KINDS", "EventBus", "Subscriber",
    "DatasetStore", "ExperimentJob", "ExperimentManager", "RequestError",
    "run_experiment",
]

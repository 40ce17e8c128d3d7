"""The virtual lab: one instrument state, one sample, serialized commands.

All mutations of the instrument state go through a single lock so that
concurrent clients always observe consistent snapshots; experiments take
an exclusive lease so only one of them owns the instrument at a time.
"""

import threading
from typing import Callable, Optional

import numpy as np

from .instrument import InstrumentState, PSFModel
from .noise import NoiseModel
from .sample import VirtualSample, single_nv_sample


class LeaseError(RuntimeError):
    """A second experiment tried to start while one holds the lease."""


class VirtualLab:
    """Holds the instrument, sample, and noise model behind a command lock."""

    def __init__(self, state: Optional[InstrumentState] = None,
                 sample: Optional[VirtualSample] = None,
                 psf: Optional[PSFModel] = None,
                 noise: Optional[NoiseModel] = None,
                 seed: int = 0):
        self._lock = threading.RLock()
        self._state = state if state is not None else InstrumentState()
        self._sample = sample if sample is not None else single_nv_sample()
        self.psf = psf if psf is not None else PSFModel()
        self.noise = noise if noise is not None else NoiseModel()
        self.seed = seed
        self._lease_holder: Optional[str] = None

    @property
    def state(self) -> InstrumentState:
        with self._lock:
            return self._state

    @property
    def sample(self) -> VirtualSample:
        with self._lock:
            return self._sample

    def set_state(self, **changes) -> InstrumentState:
        """Apply changes atomically; returns the new snapshot."""
        with self._lock:
            self._state = self._state.with_changes(**changes)
            return self._state

    def load_sample(self, sample: VirtualSample) -> None:
        with self._lock:
            self._sample = sample

    def command(self, fn: Callable[[InstrumentState], InstrumentState]) -> InstrumentState:
        """Run an arbitrary state transition under the command lock."""
        with self._lock:
            self._state = fn(self._state)
            return self._state

    def acquire_lease(self, holder: str) -> None:
        with self._lock:
            if self._lease_holder is not None:
                raise LeaseError(
                    f"instrument leased by {self._lease_holder!r}")
            self._lease_holder = holder

    def release_lease(self, holder: str) -> None:
        with self._lock:
            if self._lease_holder == holder:
                self._lease_holder = None

    @property
    def lease_holder(self) -> Optional[str]:
        with self._lock:
            return self._lease_holder

    def snapshot(self) -> dict:
        """JSON-friendly view of the instrument state."""
        s = self.state
        return {
            "stage_voltage": [float(v) for v in s.stage_voltage],
            "stage_position_um": [float(p) for p in s.stage_position_um],
            "laser_power": s.laser_power,
            "attenuation": s.attenuation,
            "mw": {"frequency": s.mw.frequency, "rabi": s.mw.rabi,
                   "on": s.mw.on},
            "magnet_field": [float(b) for b in s.magnet_field],
            "spad": {"dark_rate": s.spad.dark_rate,
                     "dead_time": s.spad.dead_time,
                     "quantum_efficiency": s.spad.quantum_efficiency,
                     "collection_efficiency": s.spad.collection_efficiency},
            "seed": self.seed,
            "sample": self.sample.name,
            "lease_holder": self.lease_holder,
        }

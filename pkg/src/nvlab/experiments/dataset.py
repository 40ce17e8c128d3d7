"""Dataset container shared by all experiments.

A Dataset couples named coordinate axes to a value array (plus optional
per-point uncertainty), carries the metadata needed to re-run the
experiment deterministically, and records any fits performed on it.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..analysis.fit import FitResult

KINDS = ("scan2d", "spectrum", "time_trace", "histogram", "sweep")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    """One named coordinate vector with a unit string."""

    name: str
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) == 0:
            raise DatasetError(f"axis {self.name!r} must be a nonempty vector")
        object.__setattr__(self, "values", v)


@dataclass
class Dataset:
    """Axes + values + uncertainty + metadata + fits for one experiment."""

    kind: str
    axes: Tuple[Axis, ...]
    values: np.ndarray
    uncertainty: Optional[np.ndarray] = None
    metadata: Dict = field(default_factory=dict)
    fits: List[FitResult] = field(default_factory=list)
    aborted: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DatasetError(f"unknown dataset kind {self.kind!r}")
        self.axes = tuple(self.axes)
        self.values = np.asarray(self.values)
        shape = tuple(len(a.values) for a in self.axes)
        if self.values.shape != shape:
            raise DatasetError(
                f"values shape {self.values.shape} does not match axes {shape}")
        if self.uncertainty is not None:
            self.uncertainty = np.asarray(self.uncertainty)
            if self.uncertainty.shape != self.values.shape:
                raise DatasetError("uncertainty shape must match values")

    def axis(self, name: str) -> Axis:
        for a in self.axes:
            if a.name == name:
                return a
        raise DatasetError(f"no axis named {name!r}")

    @property
    def fit(self) -> Optional[FitResult]:
        """The primary (first converged, else first) fit, if any."""
        for f in self.fits:
            if f.converged:
                return f
        return self.fits[0] if self.fits else None

"""Instrument-chain models: piezo stage map, PSF, SPAD config, state.

The stage maps 0-10 V linearly onto 0-100 um per axis. The point-spread
function is a separable Gaussian stand-in for the diffraction-limited
spot; its default widths follow the Abbe FWHM for a 650 nm longpass edge
and NA 1.45 (FWHM = 0.51*lambda/NA, sigma = FWHM/2.355).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

STAGE_RANGE_UM = 100.0
STAGE_RANGE_V = 10.0
DEFAULT_JITTER_SIGMA_UM = 2e-3   # 2 nm
DEFAULT_SETTLE_TIME = 1e-3       # s, first-order time constant


class InstrumentError(ValueError):
    pass


def stage_position(voltage, rng: Optional[np.random.Generator] = None,
                   jitter_sigma_um: float = 0.0,
                   prev_position=None, elapsed: Optional[float] = None,
                   time_constant: float = DEFAULT_SETTLE_TIME) -> np.ndarray:
    """Map controller voltages (V) to stage position (um).

    Optional Gaussian jitter and a first-order settling lag from a previous
    position can be modeled; by default the map is exactly linear.
    """
    v = np.asarray(voltage, dtype=float)
    if v.shape != (3,):
        raise InstrumentError("voltage must be a 3-vector")
    if (v < 0).any() or (v > STAGE_RANGE_V).any():
        raise InstrumentError(f"stage voltage outside [0, {STAGE_RANGE_V}] V")
    pos = v * (STAGE_RANGE_UM / STAGE_RANGE_V)
    if prev_position is not None and elapsed is not None:
        prev = np.asarray(prev_position, dtype=float)
        pos = pos + (prev - pos) * math.exp(-elapsed / time_constant)
    if rng is not None and jitter_sigma_um > 0:
        pos = pos + rng.normal(0.0, jitter_sigma_um, size=3)
    return pos


def stage_voltage(position_um) -> np.ndarray:
    """Inverse stage map, um -> V."""
    p = np.asarray(position_um, dtype=float)
    if (p < 0).any() or (p > STAGE_RANGE_UM).any():
        raise InstrumentError(f"position outside [0, {STAGE_RANGE_UM}] um")
    return p * (STAGE_RANGE_V / STAGE_RANGE_UM)


@dataclass(frozen=True)
class PSFModel:
    """Separable Gaussian focal spot (widths in um)."""

    lateral_sigma: float = 0.51 * 0.650 / 1.45 / 2.355
    axial_sigma: float = 3 * 0.51 * 0.650 / 1.45 / 2.355
    wavelength: float = 650.0       # nm
    numerical_aperture: float = 1.45

    def __post_init__(self):
        if self.lateral_sigma <= 0 or self.axial_sigma <= 0:
            raise InstrumentError("PSF sigmas must be > 0")
        if not 0 < self.numerical_aperture <= 1.6:
            raise InstrumentError("numerical aperture must be in (0, 1.6]")


def psf_weight(psf: PSFModel, delta) -> float:
    """Relative excitation/collection weight at offset delta (um); 1 at 0."""
    d = np.asarray(delta, dtype=float)
    lat = (d[..., 0] ** 2 + d[..., 1] ** 2) / (2.0 * psf.lateral_sigma ** 2)
    ax = d[..., 2] ** 2 / (2.0 * psf.axial_sigma ** 2)
    return np.exp(-(lat + ax))


@dataclass(frozen=True)
class SPADConfig:
    """Detector model: dark counts, non-paralyzable dead time, efficiencies.

    The default numbers are plumbing values for a realistic photon budget,
    overridable from the instrument config.
    """

    dark_rate: float = 100.0
    dead_time: float = 50e-9
    quantum_efficiency: float = 0.4
    collection_efficiency: float = 0.05

    def __post_init__(self):
        if self.dark_rate < 0 or self.dead_time < 0:
            raise InstrumentError("dark_rate and dead_time must be >= 0")
        for name in ("quantum_efficiency", "collection_efficiency"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise InstrumentError(f"{name} must be in (0, 1]")

    @property
    def throughput(self) -> float:
        return self.quantum_efficiency * self.collection_efficiency


@dataclass(frozen=True)
class MWSettings:
    frequency: float = 2.87e9
    rabi: float = 0.0
    on: bool = False


@dataclass(frozen=True)
class InstrumentState:
    """The single mutable truth of the virtual lab (as immutable snapshots)."""

    stage_voltage: np.ndarray = field(
        default_factory=lambda: np.array([5.0, 5.0, 5.0]))
    laser_power: float = 1.0e-3
    attenuation: float = 0.0  # dB
    mw: MWSettings = field(default_factory=MWSettings)
    magnet_field: np.ndarray = field(default_factory=lambda: np.zeros(3))
    spad: SPADConfig = field(default_factory=SPADConfig)
    seed: int = 0

    def __post_init__(self):
        v = np.asarray(self.stage_voltage, dtype=float)
        if v.shape != (3,) or (v < 0).any() or (v > STAGE_RANGE_V).any():
            raise InstrumentError("stage_voltage components must be in [0, 10] V")
        object.__setattr__(self, "stage_voltage", v)
        b = np.asarray(self.magnet_field, dtype=float)
        if b.shape != (3,):
            raise InstrumentError("magnet_field must be a 3-vector")
        object.__setattr__(self, "magnet_field", b)
        if self.laser_power < 0:
            raise InstrumentError("laser_power must be >= 0")

    @property
    def stage_position_um(self) -> np.ndarray:
        return stage_position(self.stage_voltage)

    @property
    def effective_laser_power(self) -> float:
        return self.laser_power * 10.0 ** (-self.attenuation / 10.0)

    def with_changes(self, **kw) -> "InstrumentState":
        return replace(self, **kw)


def axis_field_projection(magnet_field, axis) -> float:
    """Field component along the NV axis (T)."""
    a = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(a) - 1.0) > 1e-9:
        raise InstrumentError("axis must be unit-norm")
    return float(np.dot(np.asarray(magnet_field, dtype=float), a))

"""Virtual diamond samples: NV emitters plus background fluorescence."""

from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np

from ..physics.model import NVParameters

VOLUME_UM = 100.0

# The four NV crystallographic axes of a (100) diamond, unit-normalized.
TETRAHEDRAL_AXES = np.array([
    [1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1],
], dtype=float) / np.sqrt(3.0)


class SampleError(ValueError):
    pass


@dataclass(frozen=True)
class Emitter:
    position: np.ndarray            # um, inside the stage volume
    params: NVParameters = field(default_factory=NVParameters)
    brightness_scale: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,):
            raise SampleError("emitter position must be a 3-vector (um)")
        if (p < 0).any() or (p > VOLUME_UM).any():
            raise SampleError(f"emitter position outside [0, {VOLUME_UM}]^3 um")
        object.__setattr__(self, "position", p)
        if self.brightness_scale <= 0:
            raise SampleError("brightness_scale must be > 0")


@dataclass(frozen=True)
class VirtualSample:
    emitters: Tuple[Emitter, ...] = ()
    background_rate_per_watt: float = 2.0e7   # counts/(s W) at the detector
    name: str = "sample"

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        if self.background_rate_per_watt < 0:
            raise SampleError("background_rate_per_watt must be >= 0")


def single_nv_sample(position=(50.0, 50.0, 50.0), axis=(0.0, 0.0, 1.0),
                     **param_overrides) -> VirtualSample:
    """One NV at the given position with default physics parameters."""
    params = NVParameters(axis=np.asarray(axis, dtype=float), **param_overrides)
    return VirtualSample(emitters=(Emitter(position=np.asarray(position,
                                                               dtype=float),
                                           params=params),),
                         name="single-nv")


def implanted_layer_sample(n_emitters: int = 12, seed: int = 1234,
                           depth_um: float = 0.01,
                           region_um: float = 20.0,
                           tetrahedral_axes: bool = False) -> VirtualSample:
    """A shallow implanted layer: emitters scattered at fixed depth.

    Positions land inside a central region of the stage volume; with
    ``tetrahedral_axes`` the four crystallographic orientations are
    assigned uniformly, otherwise all axes point along +z.
    """
    rng = np.random.default_rng(seed)
    lo = (VOLUME_UM - region_um) / 2.0
    emitters: List[Emitter] = []
    for i in range(n_emitters):
        xy = rng.uniform(lo, lo + region_um, size=2)
        axis = (TETRAHEDRAL_AXES[i % 4] if tetrahedral_axes
                else np.array([0.0, 0.0, 1.0]))
        pos = np.array([xy[0], xy[1], 50.0 + depth_um])
        emitters.append(Emitter(position=pos, params=NVParameters(axis=axis),
                                brightness_scale=float(rng.uniform(0.8, 1.2))))
    return VirtualSample(emitters=tuple(emitters), name="implanted-layer")


def empty_sample() -> VirtualSample:
    return VirtualSample(emitters=(), name="empty")

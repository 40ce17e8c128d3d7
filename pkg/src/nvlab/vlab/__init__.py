from .detector import dead_time_rate, draw_time_tags, spad_sample, tcspc_histogram
from .engine import (
    RunResult,
    collected_rate,
    emitter_weights,
    rng_for,
    run_timeline,
    scan_rates,
    steady_emission_rate,
)
from .instrument import (
    DEFAULT_JITTER_SIGMA_UM,
    STAGE_RANGE_UM,
    STAGE_RANGE_V,
    InstrumentError,
    InstrumentState,
    MWSettings,
    PSFModel,
    SPADConfig,
    axis_field_projection,
    psf_weight,
    stage_position,
    stage_voltage,
)
from .lab import LeaseError, VirtualLab
from .noise import (
    DEFAULT_SIGMA_OU,
    DEFAULT_SIGMA_STATIC,
    DEFAULT_TAU_CORR,
    NoiseModel,
    NoiseTrack,
)
from .sample import (
    TETRAHEDRAL_AXES,
    VOLUME_UM,
    Emitter,
    SampleError,
    VirtualSample,
    empty_sample,
    implanted_layer_sample,
    single_nv_sample,
)

__all__ = [
    "dead_time_rate", "draw_time_tags", "spad_sample", "tcspc_histogram",
    "RunResult", "collected_rate", "emitter_weights", "rng_for",
    "run_timeline", "scan_rates", "steady_emission_rate",
    "DEFAULT_JITTER_SIGMA_UM", "STAGE_RANGE_UM", "STAGE_RANGE_V",
    "InstrumentError", "InstrumentState", "MWSettings", "PSFModel",
    "SPADConfig", "axis_field_projection", "psf_weight", "stage_position",
    "stage_voltage",
    "LeaseError", "VirtualLab",
    "DEFAULT_SIGMA_OU", "DEFAULT_SIGMA_STATIC", "DEFAULT_TAU_CORR",
    "NoiseModel", "NoiseTrack",
    "TETRAHEDRAL_AXES", "VOLUME_UM", "Emitter", "SampleError",
    "VirtualSample", "empty_sample", "implanted_layer_sample",
    "single_nv_sample",
]

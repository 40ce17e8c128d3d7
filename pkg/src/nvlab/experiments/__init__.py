"""End-to-end measurement suite producing fitted Datasets."""

from .dataset import KINDS, Axis, Dataset, DatasetError
from .suite import (AutofocusResult, ExperimentError, NoPeakError, autofocus,
                    confocal_scan, cw_odmr, hahn_echo, lifetime, rabi, ramsey,
                    readout_contrast)

__all__ = [
    "KINDS", "Axis", "Dataset", "DatasetError",
    "AutofocusResult", "ExperimentError", "NoPeakError", "autofocus",
    "confocal_scan", "cw_odmr", "hahn_echo", "lifetime", "rabi", "ramsey",
    "readout_contrast",
]

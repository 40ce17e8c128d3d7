"""Model functions, least-squares fitting, and field extraction."""

from .fit import FitError, FitResult, SingularJacobianError, fit
from .models import (DECAY_BOUNDS, GAUSS_BOUNDS, RABI_BOUNDS,
                     STRETCHED_BOUNDS, Model, ModelError, ModelSpec,
                     eval_model, get_model)
from .routines import (bz_from_splitting, dip_centers, fit_exp_decay,
                       fit_gaussian_peak, fit_lorentzian_dips, fit_rabi,
                       fit_ramsey_envelope, fit_stretched_exp,
                       guess_exp_decay, guess_rabi,
                       peak_find, pulse_calibration)

__all__ = [
    "FitError", "FitResult", "SingularJacobianError", "Model", "ModelError",
    "ModelSpec", "DECAY_BOUNDS", "GAUSS_BOUNDS", "RABI_BOUNDS",
    "STRETCHED_BOUNDS",
    "bz_from_splitting", "dip_centers", "eval_model", "fit", "fit_exp_decay",
    "fit_gaussian_peak", "fit_lorentzian_dips", "fit_rabi",
    "fit_ramsey_envelope", "fit_stretched_exp", "get_model",
    "guess_exp_decay", "guess_rabi",
    "peak_find", "pulse_calibration",
]

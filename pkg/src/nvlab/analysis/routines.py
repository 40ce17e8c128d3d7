"""Field extraction, pulse calibration, dip finding, and seeded fits.

The seeding strategies make every experiment fit deterministic: the Rabi
frequency comes from the dominant discrete-Fourier peak of the detrended
sweep, Lorentzian centers from smoothed local-minima detection, and decay
constants from a log-linear regression on the envelope.
"""

import math
from typing import List, Optional, Tuple

import numpy as np

from ..units import TIME_GRID, snap_time
from .fit import FitError, FitResult, fit
from .models import (DECAY_BOUNDS, GAUSS_BOUNDS, RABI_BOUNDS,
                     STRETCHED_BOUNDS, ModelSpec)


def bz_from_splitting(nu_plus: float, nu_minus: float, gamma_e: float = 28e9,
                      sigma_plus: float = 0.0,
                      sigma_minus: float = 0.0) -> Tuple[float, float]:
    """Axial field from the ODMR resonance splitting: Bz = (v+ - v-)/(2*gamma).

    Center uncertainties propagate in quadrature.
    """
    if nu_plus <= nu_minus:
        raise ValueError("nu_plus must exceed nu_minus")
    bz = (nu_plus - nu_minus) / (2.0 * gamma_e)
    u = math.hypot(sigma_plus, sigma_minus) / (2.0 * gamma_e)
    return bz, u


def pulse_calibration(omega: float,
                      grid: float = TIME_GRID) -> Tuple[float, float]:
    """(tau_pi, tau_pi_2) = (1/(2 Omega), 1/(4 Omega)), snapped to the grid."""
    if omega <= 0:
        raise ValueError("omega must be > 0")
    return snap_time(1.0 / (2.0 * omega), grid), snap_time(1.0 / (4.0 * omega), grid)


def _smooth(y: np.ndarray, window: int) -> np.ndarray:
    kernel = np.ones(window) / window
    pad = window // 2
    padded = np.concatenate([np.full(pad, y[0]), y, np.full(pad, y[-1])])
    return np.convolve(padded, kernel, mode="valid")[:len(y)]


def peak_find(x, y, max_peaks: int = 2, min_snr: float = 5.0) -> List[float]:
    """Candidate dip centers, deepest first; ties favor lower frequency.

    Depth is measured against the high quantile of the smoothed spectrum
    and compared with the smoothed noise level, so a flat noisy spectrum
    yields no candidates.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 5:
        raise ValueError("need at least 5 points")
    window = max(3, len(y) // 25)
    ys = _smooth(y, window)
    resid = y - ys
    noise = 1.4826 * np.median(np.abs(resid - np.median(resid)))
    noise_s = max(noise / math.sqrt(window), 1e-300)
    baseline = np.quantile(ys, 0.85)
    candidates = []
    for i in range(1, len(ys) - 1):
        if ys[i] <= ys[i - 1] and ys[i] < ys[i + 1]:
            depth = baseline - ys[i]
            if depth > min_snr * noise_s:
                candidates.append((depth, x[i]))
    # deepest first; equal depths resolved toward lower frequency
    candidates.sort(key=lambda c: (-c[0], c[1]))
    # drop near-duplicates closer than one smoothing window
    dx = np.median(np.diff(x)) * window if len(x) > 1 else 0.0
    selected: List[float] = []
    for _, cx in candidates:
        if all(abs(cx - s) > dx for s in selected):
            selected.append(cx)
        if len(selected) >= max_peaks:
            break
    return selected


def guess_exp_decay(x: np.ndarray, y: np.ndarray) -> dict:
    """Log-linear regression seed for A*exp(-x/T) + c."""
    off = float(np.min(y))
    amp = float(y[0] - off)
    z = y - off + 0.05 * max(amp, 1e-300)
    mask = z > 0
    slope = np.polyfit(x[mask], np.log(z[mask]), 1)[0]
    tau = -1.0 / slope if slope < 0 else (x[-1] - x[0])
    tau = float(np.clip(tau, 1e-9, 1.0))
    return {"amplitude": max(amp, 1e-300), "tau": tau, "offset": off}


def fit_exp_decay(x, y, sigma=None, guess: Optional[dict] = None) -> FitResult:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    spec = ModelSpec("exp_decay", guess or guess_exp_decay(x, y),
                     bounds=DECAY_BOUNDS)
    return fit(spec, x, y, sigma)


def guess_rabi(x: np.ndarray, y: np.ndarray) -> dict:
    """Fourier-peak seed for the decaying cosine of the Rabi sweep."""
    y0 = y - np.mean(y)
    n = len(x)
    dt = float(np.median(np.diff(x)))
    spectrum = np.abs(np.fft.rfft(y0 * np.hanning(n)))
    freqs = np.fft.rfftfreq(n, dt)
    k = int(np.argmax(spectrum[1:]) + 1)
    omega = float(freqs[k])
    amp = float((np.max(y) - np.min(y)) / 2.0)
    return {"a": max(amp, 1e-300), "omega": max(omega, 1.0), "phi": 0.0,
            "t2_star": float(np.clip((x[-1] - x[0]) / 2, 2e-9, 1.0)),
            "c": float(np.mean(y))}


def fit_rabi(x, y, sigma=None, guess: Optional[dict] = None) -> FitResult:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    spec = ModelSpec("rabi_eq4", guess or guess_rabi(x, y), bounds=RABI_BOUNDS)
    return fit(spec, x, y, sigma)


def fit_gaussian_peak(x, y, sigma=None,
                      guess: Optional[dict] = None) -> FitResult:
    """Fit a single Gaussian peak on a flat baseline, seeded at the max."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if guess is None:
        off = float(np.min(y))
        k = int(np.argmax(y))
        guess = {"amplitude": max(float(y[k] - off), 1e-300),
                 "center": float(x[k]),
                 "sigma": float(x[-1] - x[0]) / 6.0,
                 "offset": off}
    spec = ModelSpec("gaussian_peak", guess, bounds=GAUSS_BOUNDS)
    return fit(spec, x, y, sigma)


def fit_ramsey_envelope(x, y, sigma=None) -> FitResult:
    """Fit the free-precession recovery offset + amplitude*exp(-(x/T)^n).

    At tau = 0 the two pi/2 pulses concatenate into a pi rotation, so the
    signal starts dark and saturates as the coherence dephases: the
    amplitude is negative and ``tau`` is the dephasing time. The exponent
    is seeded at 2 (quasi-static detuning noise gives a Gaussian decay)
    but left free.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    guess = {"amplitude": float(y[0] - y[-1]),
             "tau": float(max((x[-1] - x[0]) / 3.0, 2e-9)),
             "exponent": 2.0, "offset": float(y[-1])}
    bounds = dict(STRETCHED_BOUNDS)
    bounds["amplitude"] = (-np.inf, np.inf)
    spec = ModelSpec("stretched_exp", guess, bounds=bounds)
    return fit(spec, x, y, sigma)


def fit_stretched_exp(x, y, sigma=None,
                      guess: Optional[dict] = None) -> FitResult:
    """Fit A*exp(-(x/T)^n) + c with the exponent free."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if guess is None:
        g = guess_exp_decay(x, y)
        guess = {"amplitude": g["amplitude"], "tau": g["tau"],
                 "exponent": 1.0, "offset": g["offset"]}
    spec = ModelSpec("stretched_exp", guess, bounds=STRETCHED_BOUNDS)
    return fit(spec, x, y, sigma)


def _fit_dips_seeded(x, y, sigma, seeds, fwhm_seed) -> FitResult:
    offset = float(np.quantile(y, 0.85))
    span = float(x[-1] - x[0])
    depth = max(1.0 - float(np.min(y)) / offset, 1e-3)
    n = len(seeds)
    guess = {"offset": offset}
    bounds = {"offset": (0.0, np.inf)}
    w_lo, w_hi = span / len(x), span
    c_lo, c_hi = float(x[0]), float(x[-1])
    for i, c in enumerate(sorted(seeds)):
        guess[f"a{i}"] = depth / n
        guess[f"center{i}"] = float(np.clip(c, c_lo + 1e-12 * span,
                                            c_hi - 1e-12 * span))
        guess[f"fwhm{i}"] = float(np.clip(fwhm_seed, 1.01 * w_lo,
                                          0.99 * w_hi))
        bounds[f"a{i}"] = (0.0, 1.0)
        bounds[f"center{i}"] = (c_lo, c_hi)
        bounds[f"fwhm{i}"] = (w_lo, w_hi)
    spec = ModelSpec("lorentzian_multi", guess, bounds=bounds, n_peaks=n)
    return fit(spec, x, y, sigma)


def fit_lorentzian_dips(x, y, sigma=None, max_peaks: int = 2) -> FitResult:
    """Fit 1..max_peaks Lorentzian dips, choosing the count by residual.

    A single-dip fit is always attempted first. Two-dip fits are seeded
    both from the peak_find candidates and by splitting the single dip
    symmetrically by its fitted half width (the overlapping-dip case shows
    only one local minimum). The two-dip model is kept only when it lowers
    the residual norm by more than 5 %.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    centers = peak_find(x, y, max_peaks=max_peaks)
    if not centers:
        raise FitError("no dip candidates found in spectrum")
    span = float(x[-1] - x[0])
    best = _fit_dips_seeded(x, y, sigma, [centers[0]], span / 20)
    if max_peaks >= 2:
        fwhm1 = max(best.value("fwhm0"), span / len(x))
        seed_sets = [[best.value("center0") - fwhm1 / 2,
                      best.value("center0") + fwhm1 / 2]]
        if len(centers) >= 2:
            seed_sets.append(centers[:2])
        best2: Optional[FitResult] = None
        for seeds in seed_sets:
            try:
                res = _fit_dips_seeded(x, y, sigma, seeds, fwhm1)
            except FitError:
                continue
            if best2 is None or res.residual_norm < best2.residual_norm:
                best2 = res
        if best2 is not None and best2.residual_norm < 0.95 * best.residual_norm:
            # two dips must actually be resolved: closer than half a
            # linewidth means the pair is just splitting one noisy dip
            sep = abs(best2.value("center1") - best2.value("center0"))
            min_w = min(best2.value("fwhm0"), best2.value("fwhm1"))
            if sep > 0.5 * min_w:
                best = best2
    return best


def dip_centers(result: FitResult) -> List[Tuple[float, float]]:
    """Sorted (center, sigma) pairs from a lorentzian_multi FitResult."""
    out = []
    i = 0
    while f"center{i}" in result.parameters:
        out.append(result.parameters[f"center{i}"])
        i += 1
    out.sort(key=lambda cs: cs[0])
    return out

"""The measurement suite: scan, ODMR, Rabi, readout traces, lifetime, echo.

Every experiment takes a VirtualLab, executes timelines against immutable
snapshots of its state, and returns a Dataset whose metadata is complete
enough to re-run the measurement bit-identically (seed, instrument
snapshot, sequence source, sweep parameters).

Sweep-style experiments normalize each point by an interleaved bright
reference (same init/readout, no MW pulse) so slow drifts cancel; raw
counts are kept in the metadata.
"""

import math
import zlib
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..analysis import (FitError, FitResult, bz_from_splitting, dip_centers,
                        fit_exp_decay, fit_gaussian_peak,
                        fit_lorentzian_dips, fit_rabi, fit_ramsey_envelope,
                        fit_stretched_exp, pulse_calibration)
from ..sequencer import (CW_DWELL, CW_LASER_POWER, CW_MW_RABI,
                         DEFAULT_LASER_POWER, DEFAULT_READOUT_WINDOW,
                         TCSPC_RESOLUTION, LaserStmt, MWStmt, PulseSequence,
                         SweepSpec, WaitStmt, Window, build_hahn,
                         build_lifetime, build_odmr_cw, build_rabi,
                         build_ramsey, render_sequence)
from ..vlab import (STAGE_RANGE_UM, VirtualLab, dead_time_rate, rng_for,
                    run_timeline, scan_rates, tcspc_histogram)
from .dataset import Axis, Dataset

DEFAULT_SHOTS = 100_000
SCAN_SETTLE_CONSTANTS = 3  # per-line settle wait, in stage time constants


class ExperimentError(ValueError):
    pass


class NoPeakError(ExperimentError):
    pass


def _failed_fit(model: str) -> FitResult:
    return FitResult(model=model, parameters={}, residual_norm=math.inf,
                     converged=False, n_iter=0)


def _metadata(lab: VirtualLab, name: str, params: dict,
              sequence_source: Optional[str] = None,
              sweep: Optional[SweepSpec] = None) -> dict:
    md = {
        "experiment": name,
        "seed": lab.seed,
        "instrument": lab.snapshot(),
        "parameters": params,
        "noise_model": {
            "enabled": lab.noise.enabled,
            "sigma_static": lab.noise.sigma_static,
            "sigma_ou": lab.noise.sigma_ou,
            "tau_corr": lab.noise.tau_corr,
        },
    }
    if sequence_source is not None:
        md["sequence_source"] = sequence_source
    if sweep is not None:
        md["sweep"] = {"variable": sweep.variable, "start": sweep.start,
                       "stop": sweep.stop, "points": sweep.points,
                       "spacing": sweep.spacing}
    return md


def _bright_reference(init_duration: float = 3e-6,
                      laser_power: float = DEFAULT_LASER_POWER,
                      readout_window: float = DEFAULT_READOUT_WINDOW,
                      tagged: bool = False) -> PulseSequence:
    """Init laser + readout laser with no MW: the bright (|0>) reference."""
    return PulseSequence(
        name="bright_reference",
        statements=(
            LaserStmt(duration=init_duration, power=laser_power),
            WaitStmt(1e-6),
            WaitStmt(500e-9),
            LaserStmt(duration=init_duration, power=laser_power,
                      readout=Window(0.0, readout_window, tagged=tagged)),
        ),
        variables={},
    )


def _noise_seed(lab: VirtualLab, name: str) -> int:
    """Fixed noise-path panel per experiment type: every sweep point (and
    every run) reuses the same set of detuning realizations. The panel is
    a variance-reduction fixture; the instrument seed still drives all
    photon statistics."""
    return zlib.crc32(name.encode())


def _run(lab: VirtualLab, timeline, rng, shots: int, n_noise: int,
         **kw):
    return run_timeline(timeline, lab.sample, lab.state, lab.psf, rng,
                        shots=shots, noise=lab.noise, n_noise=n_noise, **kw)


# --- confocal scan ---------------------------------------------------------

def confocal_scan(lab: VirtualLab,
                  region: Tuple[Tuple[float, float], Tuple[float, float]],
                  resolution: float, dwell: float = 1e-3,
                  progress: Optional[Callable] = None,
                  should_abort: Optional[Callable[[], bool]] = None) -> Dataset:
    """Serpentine raster of collected counts over an (x, y) region (um)."""
    (x0, x1), (y0, y1) = region
    if resolution <= 0:
        raise ExperimentError("resolution must be > 0")
    for lo, hi in ((x0, x1), (y0, y1)):
        if not (0 <= lo < hi <= STAGE_RANGE_UM):
            raise ExperimentError(
                f"scan region outside stage travel [0, {STAGE_RANGE_UM}] um")
    if dwell <= 0:
        raise ExperimentError("dwell must be > 0")
    nx = int(round((x1 - x0) / resolution)) + 1
    ny = int(round((y1 - y0) / resolution)) + 1
    x = x0 + resolution * np.arange(nx)
    y = y0 + resolution * np.arange(ny)
    state = lab.state
    z = float(state.stage_position_um[2])
    rates = scan_rates(lab.sample, state, lab.psf, x, y, z)
    eff = rates / (1.0 + rates * state.spad.dead_time)
    lam = eff * dwell
    values = np.full((ny, nx), np.nan)
    aborted = False
    for iy in range(ny):
        if should_abort is not None and should_abort():
            aborted = True
            break
        rng = rng_for(lab.seed, "confocal_scan", iy)
        order = slice(None) if iy % 2 == 0 else slice(None, None, -1)
        row = rng.poisson(lam[iy, order]).astype(float)
        values[iy, order] = row
        if progress is not None:
            progress(iy + 1, ny, {"row": iy, "counts": values[iy].tolist()})
    md = _metadata(lab, "confocal_scan", {
        "region": [[x0, x1], [y0, y1]], "resolution": resolution,
        "dwell": dwell, "z_um": z, "order": "serpentine",
        "settle_time_constants": SCAN_SETTLE_CONSTANTS,
    })
    return Dataset(kind="scan2d",
                   axes=(Axis("y", y, "um"), Axis("x", x, "um")),
                   values=values, uncertainty=np.sqrt(np.maximum(values, 1.0)),
                   metadata=md, aborted=aborted)


# --- CW ODMR ---------------------------------------------------------------

def _split_dip_centers(freqs: np.ndarray, norm: np.ndarray,
                       sigma: np.ndarray, combined: FitResult):
    """Refined (center, uncertainty) pairs via per-side single-dip fits.

    The MW drive couples whichever transition it is nearest, so each side
    of the midpoint between the two resonances is an exact single-dip
    profile with no tail from the other resonance; fitting the sides
    separately removes the center bias a joint two-Lorentzian fit picks
    up from the missing inner tails. The split point starts from the
    joint fit and is iterated to the midpoint of the side fits. Each
    center is then refit inside a window symmetric about it: the noise-
    broadened line is symmetric, so any residual lineshape mismatch
    cancels there. Two centers are reported only when their separation
    is significant.
    """
    centers = dip_centers(combined)
    if len(centers) >= 2:
        mid = 0.5 * (centers[0][0] + centers[1][0])
    else:
        mid = centers[0][0]
    pair = None
    for _ in range(2):
        left = freqs <= mid
        right = freqs >= mid
        if left.sum() < 8 or right.sum() < 8:
            return centers
        try:
            f_lo = fit_lorentzian_dips(freqs[left], norm[left], sigma[left],
                                       max_peaks=1)
            f_hi = fit_lorentzian_dips(freqs[right], norm[right],
                                       sigma[right], max_peaks=1)
        except FitError:
            return centers
        (c_lo, s_lo), = dip_centers(f_lo)
        (c_hi, s_hi), = dip_centers(f_hi)
        pair = [(c_lo, s_lo), (c_hi, s_hi)]
        mid = 0.5 * (c_lo + c_hi)
    refined = []
    for side, (c, s) in enumerate(pair):
        for _ in range(2):
            edge = freqs[0] if side == 0 else freqs[-1]
            h = min(abs(mid - c), abs(c - edge))
            win = np.abs(freqs - c) <= h
            if win.sum() < 8:
                break
            try:
                f_win = fit_lorentzian_dips(freqs[win], norm[win],
                                            sigma[win], max_peaks=1)
            except FitError:
                break
            (c, s), = dip_centers(f_win)
        refined.append((c, s))
    (c_lo, s_lo), (c_hi, s_hi) = refined
    if len(centers) >= 2:
        return refined
    # The joint fit saw a single dip, so demand real evidence for a pair:
    # the side centers must separate by a sizeable fraction of that dip's
    # width, and the spectrum must rise to a local maximum between them
    # (the signature that distinguishes two dips from one broadened one).
    spacing = float(np.median(np.diff(freqs)))
    threshold = max(3.0 * spacing, 4.0 * math.hypot(s_lo, s_hi),
                    0.3 * combined.value("fwhm0"))
    if not c_hi - c_lo > threshold:
        return centers
    window = max(3, len(norm) // 25)
    kernel = np.ones(window) / window
    smooth = np.convolve(norm, kernel, mode="same")

    def level(f0: float) -> float:
        sel = np.abs(freqs - f0) <= 2.0 * spacing
        return float(smooth[sel].mean()) if sel.any() else math.nan

    bump = level(0.5 * (c_lo + c_hi)) - max(level(c_lo), level(c_hi))
    noise_level = float(np.median(sigma)) / math.sqrt(window)
    if math.isfinite(bump) and bump > 3.0 * noise_level:
        return refined
    return centers


def cw_odmr(lab: VirtualLab, f_start: float, f_stop: float, points: int,
            dwell: float = CW_DWELL, repeats: int = 64,
            laser_power: float = CW_LASER_POWER, omega: float = CW_MW_RABI,
            n_noise: int = 16,
            progress: Optional[Callable] = None,
            should_abort: Optional[Callable[[], bool]] = None) -> Dataset:
    """PL vs MW frequency under continuous laser + MW; Lorentzian dip fits."""
    if points < 2:
        raise ExperimentError("need at least 2 frequency points")
    seq, sweep = build_odmr_cw(f_start, f_stop, points, dwell=dwell,
                               laser_power=laser_power, omega=omega)
    freqs = sweep.values()
    counts = np.zeros(points)
    aborted = False
    for k, f in enumerate(freqs):
        if should_abort is not None and should_abort():
            aborted = True
            break
        rng = rng_for(lab.seed, "cw_odmr", k)
        res = _run(lab, seq.bind({"f": float(f)}), rng, shots=repeats,
                   n_noise=n_noise, noise_seed=_noise_seed(lab, "cw_odmr"),
                   antithetic=True)
        counts[k] = res.window_counts[0]
        if progress is not None:
            progress(k + 1, points, {"frequency": float(f),
                                     "counts": int(counts[k])})
    baseline = float(np.quantile(counts[~np.isnan(counts)], 0.85)) or 1.0
    norm = counts / baseline
    sigma = np.sqrt(np.maximum(counts, 1.0)) / baseline
    fits: List[FitResult] = []
    md = _metadata(lab, "cw_odmr", {
        "f_start": f_start, "f_stop": f_stop, "points": points,
        "dwell": dwell, "repeats": repeats, "laser_power": laser_power,
        "omega": omega, "n_noise": n_noise,
    }, sequence_source=render_sequence(seq), sweep=sweep)
    md["raw_counts"] = counts.tolist()
    md["baseline"] = baseline
    if not aborted:
        try:
            fits.append(fit_lorentzian_dips(freqs, norm, sigma))
        except FitError:
            fits.append(_failed_fit("lorentzian_multi(1)"))
        centers = []
        if fits[0].converged:
            centers = _split_dip_centers(freqs, norm, sigma, fits[0])
        md["dip_centers_hz"] = [c for c, _ in centers]
        md["dip_center_sigmas_hz"] = [s for _, s in centers]
        if len(centers) == 2:
            (c_lo, s_lo), (c_hi, s_hi) = centers
            bz, u = bz_from_splitting(c_hi, c_lo, sigma_plus=s_hi,
                                      sigma_minus=s_lo)
            md["inferred_bz_t"] = bz
            md["inferred_bz_sigma_t"] = u
    return Dataset(kind="spectrum", axes=(Axis("frequency", freqs, "Hz"),),
                   values=norm, uncertainty=sigma, metadata=md, fits=fits,
                   aborted=aborted)


# --- pulsed sweeps (Rabi, Ramsey, Hahn echo) -------------------------------

def _pulsed_sweep(lab: VirtualLab, name: str, sweep: SweepSpec,
                  make_seq: Callable[[float], PulseSequence],
                  shots: int, n_noise: int,
                  progress: Optional[Callable],
                  should_abort: Optional[Callable[[], bool]],
                  laser_power: float = DEFAULT_LASER_POWER):
    """Run a tau sweep with an interleaved bright reference per point."""
    taus = sweep.values()
    ref_seq = _bright_reference(laser_power=laser_power)
    raw = np.full(len(taus), np.nan)
    ref = np.full(len(taus), np.nan)
    aborted = False
    for k, tau in enumerate(taus):
        if should_abort is not None and should_abort():
            aborted = True
            break
        rng = rng_for(lab.seed, name, k)
        ns = _noise_seed(lab, name)
        res = _run(lab, make_seq(float(tau)).bind({"tau": float(tau)}), rng,
                   shots=shots, n_noise=n_noise, noise_seed=ns)
        raw[k] = res.window_counts[0]
        res_ref = _run(lab, ref_seq.bind({}), rng, shots=shots,
                       n_noise=n_noise, noise_seed=ns)
        ref[k] = res_ref.window_counts[0]
        if progress is not None:
            progress(k + 1, len(taus), {"tau": float(tau),
                                        "counts": int(raw[k]),
                                        "reference": int(ref[k])})
    safe_ref = np.maximum(ref, 1.0)
    norm = raw / safe_ref
    sigma = norm * np.sqrt(1.0 / np.maximum(raw, 1.0) + 1.0 / safe_ref)
    return taus, raw, ref, norm, sigma, aborted


def rabi(lab: VirtualLab, tau_start: float, tau_stop: float, points: int,
         mw_frequency: float, omega: float, shots: int = DEFAULT_SHOTS,
         n_noise: int = 16,
         progress: Optional[Callable] = None,
         should_abort: Optional[Callable[[], bool]] = None) -> Dataset:
    """MW pulse-length sweep; fits the decaying cosine, derives pi pulses."""
    if omega < 0:
        raise ExperimentError("omega must be >= 0")
    sweep = SweepSpec("tau", tau_start, tau_stop, points)
    make = lambda tau: build_rabi(tau=tau, mw_frequency=mw_frequency,
                                  omega=omega)
    taus, raw, ref, norm, sigma, aborted = _pulsed_sweep(
        lab, "rabi", sweep, make, shots, n_noise, progress, should_abort)
    fits: List[FitResult] = []
    md = _metadata(lab, "rabi", {
        "mw_frequency": mw_frequency, "omega": omega, "shots": shots,
        "n_noise": n_noise,
    }, sequence_source=render_sequence(make(tau_start)), sweep=sweep)
    md["raw_counts"] = raw.tolist()
    md["reference_counts"] = ref.tolist()
    if not aborted:
        try:
            fr = fit_rabi(taus, norm, sigma)
        except FitError:
            fr = _failed_fit("rabi_eq4")
        fits.append(fr)
        if fr.converged:
            tau_pi, tau_pi_2 = pulse_calibration(fr.value("omega"))
            md["tau_pi"] = tau_pi
            md["tau_pi_2"] = tau_pi_2
    return Dataset(kind="sweep", axes=(Axis("tau", taus, "s"),),
                   values=norm, uncertainty=sigma, metadata=md, fits=fits,
                   aborted=aborted)


def ramsey(lab: VirtualLab, tau_start: float, tau_stop: float, points: int,
           mw_frequency: float, omega: float, shots: int = DEFAULT_SHOTS,
           n_noise: int = 256,
           progress: Optional[Callable] = None,
           should_abort: Optional[Callable[[], bool]] = None) -> Dataset:
    """Free-precession sweep between two pi/2 pulses.

    The signal recovers from dark toward its dephased midpoint; the fitted
    recovery time constant is the free-precession dephasing time, stored
    as ``t2_star`` in the metadata.
    """
    sweep = SweepSpec("tau", tau_start, tau_stop, points)
    make = lambda tau: build_ramsey(tau=tau, omega=omega,
                                    mw_frequency=mw_frequency)
    taus, raw, ref, norm, sigma, aborted = _pulsed_sweep(
        lab, "ramsey", sweep, make, shots, n_noise, progress, should_abort)
    fits: List[FitResult] = []
    md = _metadata(lab, "ramsey", {
        "mw_frequency": mw_frequency, "omega": omega, "shots": shots,
        "n_noise": n_noise,
    }, sequence_source=render_sequence(make(tau_start)), sweep=sweep)
    md["raw_counts"] = raw.tolist()
    md["reference_counts"] = ref.tolist()
    if not aborted:
        try:
            fr = fit_ramsey_envelope(taus, norm, sigma)
        except FitError:
            fr = _failed_fit("stretched_exp")
        fits.append(fr)
        if fr.converged:
            md["t2_star"] = fr.value("tau")
    return Dataset(kind="sweep", axes=(Axis("tau", taus, "s"),),
                   values=norm, uncertainty=sigma, metadata=md, fits=fits,
                   aborted=aborted)


def hahn_echo(lab: VirtualLab, tau_start: float = 50e-9,
              tau_stop: float = 1.5e-6, points: int = 24,
              omega: float = 20.4e6, mw_frequency: float = 2.87e9,
              shots: int = 1_000_000, n_noise: int = 1024,
              stretched: bool = False,
              progress: Optional[Callable] = None,
              should_abort: Optional[Callable[[], bool]] = None) -> Dataset:
    """pi/2 - tau - pi - tau - pi/2 sweep; decay fit against 2*tau."""
    sweep = SweepSpec("tau", tau_start, tau_stop, points)
    make = lambda tau: build_hahn(tau=tau, omega=omega,
                                  mw_frequency=mw_frequency)
    taus, raw, ref, norm, sigma, aborted = _pulsed_sweep(
        lab, "hahn_echo", sweep, make, shots, n_noise, progress, should_abort)
    fits: List[FitResult] = []
    md = _metadata(lab, "hahn_echo", {
        "mw_frequency": mw_frequency, "omega": omega, "shots": shots,
        "n_noise": n_noise, "stretched": stretched,
    }, sequence_source=render_sequence(make(tau_start)), sweep=sweep)
    md["raw_counts"] = raw.tolist()
    md["reference_counts"] = ref.tolist()
    md["total_free_evolution"] = (2.0 * taus).tolist()
    md["fit_x"] = "total_free_evolution"
    if not aborted:
        fitter = fit_stretched_exp if stretched else fit_exp_decay
        try:
            fits.append(fitter(2.0 * taus, norm, sigma))
        except FitError:
            fits.append(_failed_fit("stretched_exp" if stretched
                                    else "exp_decay"))
    return Dataset(kind="sweep", axes=(Axis("tau", taus, "s"),),
                   values=norm, uncertainty=sigma, metadata=md, fits=fits,
                   aborted=aborted)


# --- readout traces --------------------------------------------------------

def readout_contrast(lab: VirtualLab, pi_duration: float,
                     bin_width: float = 20e-9, trace_length: float = 2e-6,
                     mw_frequency: float = 2.87e9, omega: float = 20.4e6,
                     shots: int = 300_000,
                     laser_power: float = DEFAULT_LASER_POWER) -> Dataset:
    """Time-binned readout PL for initial |0> (I0) and |+-1> (I1) states."""
    if bin_width <= 0 or trace_length < bin_width:
        raise ExperimentError("need trace_length >= bin_width > 0")
    if pi_duration < 0:
        raise ExperimentError("pi_duration must be >= 0")

    def make(tau: float) -> PulseSequence:
        stmts = [LaserStmt(duration=3e-6, power=laser_power), WaitStmt(1e-6)]
        variables = {}
        if tau > 0:
            stmts.append(MWStmt(duration="tau", frequency=mw_frequency,
                                amplitude=omega))
            variables = {"tau": tau}
        stmts.append(WaitStmt(500e-9))
        stmts.append(LaserStmt(duration=max(3e-6, trace_length),
                               power=laser_power,
                               readout=Window(0.0, trace_length, tagged=True)))
        return PulseSequence(name="readout_trace", statements=tuple(stmts),
                             variables=variables)

    traces = []
    for label, tau in (("I0", 0.0), ("I1", pi_duration)):
        seq = make(tau)
        rng = rng_for(lab.seed, f"readout_{label}", 0)
        res = _run(lab, seq.bind({"tau": tau} if tau > 0 else {}), rng,
                   shots=shots, n_noise=4, collect_tags=True,
                   tag_resolution=5e-9)
        tl = seq.bind({"tau": tau} if tau > 0 else {})
        w = next(win for win in tl.windows if win.tagged)
        counts, edges = tcspc_histogram(res.time_tags, bin_width,
                                        (w.start, w.start + w.duration))
        traces.append(counts.astype(float))
    i0, i1 = traces
    n_bins = len(i0)
    t = bin_width * (np.arange(n_bins) + 0.5)
    values = np.stack([i0, i1])
    md = _metadata(lab, "readout_contrast", {
        "pi_duration": pi_duration, "bin_width": bin_width,
        "trace_length": trace_length, "mw_frequency": mw_frequency,
        "omega": omega, "shots": shots,
    }, sequence_source=render_sequence(make(pi_duration)))
    md["channels"] = ["I0", "I1"]
    md["difference"] = np.abs(i0 - i1).tolist()
    return Dataset(kind="time_trace",
                   axes=(Axis("channel", np.array([0.0, 1.0]), ""),
                         Axis("time", t, "s")),
                   values=values,
                   uncertainty=np.sqrt(np.maximum(values, 1.0)),
                   metadata=md)


# --- fluorescence lifetime -------------------------------------------------

def lifetime(lab: VirtualLab, excitation: float = 1e-6,
             bin_width: float = TCSPC_RESOLUTION, dark_window: float = 200e-9,
             shots: int = 10_000_000,
             laser_power: float = DEFAULT_LASER_POWER) -> Dataset:
    """TCSPC decay histogram after the laser-off edge, with exp fit."""
    if bin_width < TCSPC_RESOLUTION:
        raise ExperimentError(
            f"bin width below the TCSPC resolution {TCSPC_RESOLUTION}")
    seq = build_lifetime(excitation=excitation, dark_window=dark_window,
                         laser_power=laser_power, bin_width=bin_width)
    tl = seq.bind({})
    rng = rng_for(lab.seed, "lifetime", 0)
    res = _run(lab, tl, rng, shots=shots, n_noise=1, collect_tags=True,
               tag_resolution=min(bin_width, 1e-9))
    w = next(win for win in tl.windows if win.tagged)
    counts, edges = tcspc_histogram(res.time_tags, bin_width,
                                    (w.start, w.start + w.duration))
    t = 0.5 * (edges[:-1] + edges[1:]) - w.start
    n_tags = int(len(res.time_tags))
    md = _metadata(lab, "lifetime", {
        "excitation": excitation, "bin_width": bin_width,
        "dark_window": dark_window, "shots": shots,
        "laser_power": laser_power,
    }, sequence_source=render_sequence(seq))
    md["n_tags"] = n_tags
    md["insufficient_counts"] = n_tags < 1000
    fits: List[FitResult] = []
    # skip the first nanosecond after the edge (fast component of the
    # |+-1> excited levels); zero-count bins stay in with unit sigma
    mask = t - t[0] >= 1e-9
    if (counts[mask] > 0).sum() >= 4:
        try:
            fits.append(fit_exp_decay(
                t[mask], counts[mask].astype(float),
                np.sqrt(np.maximum(counts[mask], 1.0))))
        except FitError:
            fits.append(_failed_fit("exp_decay"))
    else:
        fits.append(_failed_fit("exp_decay"))
    return Dataset(kind="histogram", axes=(Axis("time", t, "s"),),
                   values=counts.astype(float),
                   uncertainty=np.sqrt(np.maximum(counts, 1.0)),
                   metadata=md, fits=fits)


# --- autofocus -------------------------------------------------------------

@dataclass
class AutofocusResult:
    position: np.ndarray
    fits: List[FitResult]


def autofocus(lab: VirtualLab, emitter_guess, span: float = 1.0,
              points: int = 25, dwell: float = 5e-3) -> AutofocusResult:
    """Refine an emitter position by 1-D Gaussian fits along each axis.

    Axes are scanned around the guess one at a time; of multiple local
    count maxima the one nearest the guess wins. Raises NoPeakError on a
    flat signal.
    """
    guess = np.asarray(emitter_guess, dtype=float)
    if guess.shape != (3,):
        raise ExperimentError("emitter_guess must be a 3-vector (um)")
    if (guess < 0).any() or (guess > STAGE_RANGE_UM).any():
        raise ExperimentError("guess outside stage range")
    pos = guess.copy()
    state = lab.state
    fits: List[FitResult] = []
    for ax_i, ax_name in enumerate(("x", "y", "z")):
        lo = max(0.0, pos[ax_i] - span / 2)
        hi = min(STAGE_RANGE_UM, pos[ax_i] + span / 2)
        coords = np.linspace(lo, hi, points)
        rng = rng_for(lab.seed, f"autofocus_{ax_name}", 0)
        lam = np.zeros(points)
        if ax_i == 2:
            for j, c in enumerate(coords):
                r = scan_rates(lab.sample, state, lab.psf,
                               np.array([pos[0]]), np.array([pos[1]]),
                               float(c))[0, 0]
                lam[j] = dead_time_rate(r, state.spad.dead_time) * dwell
        else:
            xs = coords if ax_i == 0 else np.array([pos[0]])
            ys = coords if ax_i == 1 else np.array([pos[1]])
            r = scan_rates(lab.sample, state, lab.psf, xs, ys, pos[2])
            flat = r[0, :] if ax_i == 0 else r[:, 0]
            lam = np.array([dead_time_rate(v, state.spad.dead_time) * dwell
                            for v in flat])
        counts = rng.poisson(lam).astype(float)
        base = float(np.median(counts))
        peak = float(np.max(counts))
        if peak - base < 5.0 * math.sqrt(max(base, 1.0)):
            raise NoPeakError(f"no peak found along {ax_name}")
        # local maxima of the smoothed trace; nearest to the guess wins
        kernel = np.ones(3) / 3.0
        smooth = np.convolve(counts, kernel, mode="same")
        maxima = [j for j in range(1, points - 1)
                  if smooth[j] >= smooth[j - 1] and smooth[j] >= smooth[j + 1]
                  and smooth[j] - base > 0.5 * (peak - base)]
        if not maxima:
            maxima = [int(np.argmax(smooth))]
        j0 = min(maxima, key=lambda j: abs(coords[j] - pos[ax_i]))
        try:
            fr = fit_gaussian_peak(coords, counts,
                                   np.sqrt(np.maximum(counts, 1.0)),
                                   guess={"amplitude": peak - base,
                                          "center": float(coords[j0]),
                                          "sigma": (hi - lo) / 8.0,
                                          "offset": base})
        except FitError as ex:
            raise NoPeakError(f"fit failed along {ax_name}: {ex}") from None
        if not fr.converged:
            raise NoPeakError(f"no convergent peak along {ax_name}")
        fits.append(fr)
        pos[ax_i] = float(np.clip(fr.value("center"), lo, hi))
    return AutofocusResult(position=pos, fits=fits)

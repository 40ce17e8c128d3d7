"""Ties sequencer timelines to the physics engine and the detector chain.

Detuning noise enters as per-slice constant offsets. While MW is off the
ground Hamiltonian is diagonal, so a noise detuning only rotates the
ground coherences; those slices reuse the cached zero-detuning propagator
and apply the extra phases analytically, which keeps Monte-Carlo noise
averaging cheap. MW-on slices with nonzero detuning take the full matrix
exponential.
"""

import zlib
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..physics.evolve import pack_state, propagator, unpack_state
from ..physics.model import ControlSegment, NVParameters, NVState
from ..physics.evolve import emission_rate
from ..sequencer.core import Timeline, TCSPC_RESOLUTION
from .detector import dead_time_rate, draw_time_tags
from .instrument import InstrumentState, PSFModel, axis_field_projection, psf_weight
from .noise import NoiseModel, NoiseTrack
from .sample import VirtualSample

_NPH = 13  # photon-integral slot of the packed state vector

# Ground-coherence slots (row-major rho index, level-shift difference in
# units of the noise detuning) for the analytic phase fix.
_COH_SLOTS = [(1, 1.0), (3, -1.0), (5, 1.0), (7, -1.0), (2, 2.0), (6, -2.0)]

_STEADY_SETTLE = 30e-6
_WEIGHT_CUTOFF = 1e-6


def rng_for(seed: int, experiment_id: str, sweep_index: int = 0) -> np.random.Generator:
    """Splittable per-sweep-point generator keyed by (seed, id, index)."""
    key = zlib.crc32(experiment_id.encode())
    return np.random.default_rng(np.random.SeedSequence([seed, key, sweep_index]))


# During MW pulses the noise detuning is quantized to this grid so that
# per-realization propagators hit the cache. Pulses are tens of ns long,
# so a 50 kHz rounding error is a phase error below 1e-2 rad per pulse;
# free-precession slices keep the exact detuning via the phase fix below.
_MW_DETUNING_QUANTUM = 50e3


def _apply_slice(v: np.ndarray, seg: ControlSegment, params: NVParameters,
                 dt: float, detuning: float) -> np.ndarray:
    if seg.mw_on and detuning != 0.0:
        det_q = round(detuning / _MW_DETUNING_QUANTUM) * _MW_DETUNING_QUANTUM
        full = replace(seg, duration=dt, extra_detuning=det_q)
        return propagator(full, params, dt) @ v
    base = seg if seg.extra_detuning == 0.0 else replace(seg, extra_detuning=0.0)
    v = propagator(base, params, dt) @ v
    if detuning != 0.0:
        for slot, shift in _COH_SLOTS:
            v[slot] *= np.exp(-2j * np.pi * shift * detuning * dt)
    return v


def steady_emission_rate(params: NVParameters, laser_power: float,
                         b_axis: float, mw_on: bool = False,
                         mw_frequency: float = 0.0,
                         mw_rabi: float = 0.0) -> float:
    """CW steady-state emitted-photon rate for one emitter (photons/s)."""
    if laser_power <= 0:
        return 0.0
    seg = ControlSegment(duration=_STEADY_SETTLE, laser_power=laser_power,
                         mw_on=mw_on and mw_rabi > 0, mw_frequency=mw_frequency,
                         mw_rabi=mw_rabi, b_axis=b_axis)
    v = propagator(seg, params, seg.duration) @ pack_state(NVState.mixed_ground())
    return emission_rate(unpack_state(v), params)


def emitter_weights(sample: VirtualSample, state: InstrumentState,
                    psf: PSFModel) -> np.ndarray:
    pos = state.stage_position_um
    return np.array([psf_weight(psf, e.position - pos) * e.brightness_scale
                     for e in sample.emitters])


def collected_rate(sample: VirtualSample, state: InstrumentState,
                   psf: PSFModel) -> float:
    """Expected CW detector count rate at the current instrument state."""
    power = state.effective_laser_power
    spad = state.spad
    total = spad.dark_rate + sample.background_rate_per_watt * power
    if power <= 0:
        return spad.dark_rate
    weights = emitter_weights(sample, state, psf)
    for e, w in zip(sample.emitters, weights):
        if w < _WEIGHT_CUTOFF:
            continue
        b_axis = axis_field_projection(state.magnet_field, e.params.axis)
        rate = steady_emission_rate(e.params, power, b_axis,
                                    mw_on=state.mw.on,
                                    mw_frequency=state.mw.frequency,
                                    mw_rabi=state.mw.rabi)
        total += w * spad.throughput * rate
    return float(total)


def scan_rates(sample: VirtualSample, state: InstrumentState, psf: PSFModel,
               x_um: np.ndarray, y_um: np.ndarray, z_um: float) -> np.ndarray:
    """Expected CW rate on an (ny, nx) pixel grid; emitters evaluated once."""
    power = state.effective_laser_power
    spad = state.spad
    base = spad.dark_rate + sample.background_rate_per_watt * power
    rates = np.full((len(y_um), len(x_um)), base)
    if power <= 0:
        return np.full_like(rates, spad.dark_rate)
    xx, yy = np.meshgrid(x_um, y_um)
    for e in sample.emitters:
        b_axis = axis_field_projection(state.magnet_field, e.params.axis)
        r = steady_emission_rate(e.params, power, b_axis, mw_on=state.mw.on,
                                 mw_frequency=state.mw.frequency,
                                 mw_rabi=state.mw.rabi)
        lat2 = (xx - e.position[0]) ** 2 + (yy - e.position[1]) ** 2
        dz2 = (z_um - e.position[2]) ** 2
        w = np.exp(-lat2 / (2 * psf.lateral_sigma ** 2)
                   - dz2 / (2 * psf.axial_sigma ** 2)) * e.brightness_scale
        rates += w * spad.throughput * r
    return rates


@dataclass
class RunResult:
    """Outcome of executing one concrete timeline."""

    window_counts: np.ndarray          # sampled counts per readout window
    window_means: np.ndarray           # expected counts per window (all shots)
    shots: int
    time_tags: Optional[np.ndarray] = None  # arrival times (s), tagged windows


def _split_at_windows(timeline: Timeline, b_axis: float):
    """Sub-segments split at window edges, with per-window membership."""
    segs = timeline.segments(b_axis)
    edges = set()
    t = 0.0
    for s in segs:
        edges.add(t)
        t += s.duration
    edges.add(t)
    for w in timeline.windows:
        edges.update([w.start, w.start + w.duration])
    times = sorted(e for e in edges if 0.0 <= e <= timeline.duration + 1e-15)
    out = []
    for t0, t1 in zip(times, times[1:]):
        if t1 - t0 <= 1e-15:
            continue
        mid = 0.5 * (t0 + t1)
        acc = 0.0
        seg = None
        for s in segs:
            if acc <= mid < acc + s.duration:
                seg = replace(s, duration=t1 - t0)
                break
            acc += s.duration
        if seg is None:  # beyond the last control segment: dark
            ref = segs[-1]
            seg = ControlSegment(duration=t1 - t0,
                                 mw_frequency=ref.mw_frequency,
                                 b_axis=b_axis)
        members = [i for i, w in enumerate(timeline.windows)
                   if w.start - 1e-15 <= t0 and t1 <= w.start + w.duration + 1e-15]
        out.append((t0, seg, members))
    return out


def run_timeline(timeline: Timeline, sample: VirtualSample,
                 state: InstrumentState, psf: PSFModel,
                 rng: np.random.Generator, shots: int = 100_000,
                 noise: Optional[NoiseModel] = None, n_noise: int = 1,
                 collect_tags: bool = False,
                 tag_resolution: float = TCSPC_RESOLUTION,
                 noise_seed: Optional[int] = None,
                 antithetic: bool = False) -> RunResult:
    """Execute a timeline: evolve in-focus emitters, integrate emission over
    the readout windows, and convert to sampled counts (and time tags).

    ``noise_seed`` fixes the detuning-noise realizations independently of
    ``rng``; sweeps that pass the same value at every point share noise
    paths, so the realization-average error varies smoothly along the
    sweep instead of scattering point to point. With ``antithetic`` the
    realizations come in sign-flipped pairs, making the sampled detuning
    distribution exactly symmetric; spectra keep their broadening but
    acquire no net shift from a small panel.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    noise = noise or NoiseModel(enabled=False)
    if not noise.enabled:
        n_noise = 1
    windows = timeline.windows
    n_win = len(windows)
    spad = state.spad
    tagged = [i for i, w in enumerate(windows) if w.tagged] if collect_tags else []

    # With a fixed panel the quasi-static draws are standardized so their
    # sample rms equals the model sigma; the panel then broadens lines by
    # exactly the configured amount instead of its sampling luck.
    static_scale = 1.0
    if noise_seed is not None and noise.enabled and noise.sigma_static > 0:
        n_tracks = (n_noise + 1) // 2 if antithetic else n_noise
        draws = [NoiseTrack(noise, np.random.default_rng(
            np.random.SeedSequence([noise_seed, i]))).static
            for i in range(n_tracks)]
        rms = float(np.sqrt(np.mean(np.square(draws))))
        if rms > 0:
            static_scale = noise.sigma_static / rms

    weights = emitter_weights(sample, state, psf)
    mean_photons = np.zeros(n_win)  # detected, per shot, emitter part
    tag_grids = {}
    for i in tagged:
        n_bins = max(1, int(round(windows[i].duration / tag_resolution)))
        tag_grids[i] = np.zeros(n_bins)

    for e, w_e in zip(sample.emitters, weights):
        if w_e < _WEIGHT_CUTOFF:
            continue
        b_axis = axis_field_projection(state.magnet_field, e.params.axis)
        parts = _split_at_windows(timeline, b_axis)
        scale = w_e * spad.throughput
        acc = np.zeros(n_win)
        grid_acc = {i: np.zeros_like(g) for i, g in tag_grids.items()}
        for i_real in range(n_noise):
            i_track = i_real // 2 if antithetic else i_real
            sign = -1.0 if (antithetic and i_real % 2) else 1.0
            if noise_seed is not None:
                track_rng = np.random.default_rng(
                    np.random.SeedSequence([noise_seed, i_track]))
            else:
                track_rng = rng
            track = NoiseTrack(noise, track_rng, sign=sign)
            track.static *= static_scale
            v = pack_state(NVState.mixed_ground())
            for t0, seg, members in parts:
                if noise.enabled and not seg.laser_power > 0:
                    slices = track.detunings(seg.duration)
                else:
                    # laser-on stretches last far longer than the noise
                    # correlation time, so the fast component self-averages;
                    # only the quasi-static detuning survives
                    slices = [(seg.duration, track.sign * track.static)]
                tagged_here = [i for i in members if i in tag_grids]
                for dt, det in slices:
                    before = float(v[_NPH].real)
                    if tagged_here:
                        # resolve emission on the tag grid within this slice
                        n_sub = max(1, int(round(dt / tag_resolution)))
                        sub = dt / n_sub
                        t_cursor = t0
                        for _s in range(n_sub):
                            b2 = float(v[_NPH].real)
                            v = _apply_slice(v, seg, e.params, sub, det)
                            dph = float(v[_NPH].real) - b2
                            for i in tagged_here:
                                g = grid_acc[i]
                                idx = int((t_cursor - windows[i].start)
                                          / windows[i].duration * len(g))
                                if 0 <= idx < len(g):
                                    g[idx] += dph
                            t_cursor += sub
                    else:
                        v = _apply_slice(v, seg, e.params, dt, det)
                    gained = float(v[_NPH].real) - before
                    for i in members:
                        acc[i] += gained
                    t0 += dt
        mean_photons += scale * acc / n_noise
        for i in tag_grids:
            tag_grids[i] += scale * grid_acc[i] / n_noise

    # background + dark counts per window, per shot
    parts0 = _split_at_windows(timeline, 0.0)
    bg = np.zeros(n_win)
    for t0, seg, members in parts0:
        r = (sample.background_rate_per_watt * seg.laser_power
             + spad.dark_rate)
        for i in members:
            bg[i] += r * seg.duration

    means = np.zeros(n_win)
    counts = np.zeros(n_win, dtype=np.int64)
    for i, w in enumerate(windows):
        per_shot = mean_photons[i] + bg[i]
        rate = per_shot / w.duration
        eff = dead_time_rate(rate, spad.dead_time) * w.duration
        means[i] = eff * shots
        counts[i] = rng.poisson(means[i])

    tags = None
    if tagged:
        all_tags = []
        for i in tagged:
            w = windows[i]
            g = tag_grids[i]
            n_bins = len(g)
            dt = w.duration / n_bins
            bg_rate = 0.0
            for t0, seg, members in parts0:
                if i in members:
                    bg_rate = (sample.background_rate_per_watt * seg.laser_power
                               + spad.dark_rate)
                    break
            per_shot_rate = g / dt + bg_rate
            eff_rate = np.array([dead_time_rate(r, spad.dead_time)
                                 for r in per_shot_rate])
            grid_t = w.start + dt * np.arange(n_bins + 1)
            all_tags.append(draw_time_tags(grid_t, eff_rate * shots, rng))
        tags = np.sort(np.concatenate(all_tags)) if all_tags else np.empty(0)

    return RunResult(window_counts=counts, window_means=means, shots=shots,
                     time_tags=tags)

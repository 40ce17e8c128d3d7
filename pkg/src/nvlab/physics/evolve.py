"""Time evolution of the hybrid NV model.

The full master equation (coherent MW dynamics, Lindblad-type relaxation
and dephasing, laser pumping, and the classical optical rate equations) is
linear in the stacked state vector, so a segment with constant controls is
propagated exactly by one matrix exponential of its generator. A cumulative
photon-emission integral rides along as an extra state component.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .model import (ControlSegment, NVParameters, NVState, PhysicsError,
                    rotating_frame_hamiltonian, warn_polarization)
from .spin import IDX_MINUS, IDX_PLUS, IDX_ZERO

# Stacked state layout: 9 density-matrix entries (row-major), 3 excited
# populations, singlet population, emitted-photon integral.
_DIM = 14
_RHO = slice(0, 9)
_PE = slice(9, 12)
_PS = 12
_NPH = 13

POLARIZATION_TARGET = 0.85


def pack_state(state: NVState) -> np.ndarray:
    v = np.zeros(_DIM, dtype=complex)
    v[_RHO] = state.rho_g.reshape(9)
    v[_PE] = state.p_e
    v[_PS] = state.p_s
    return v


def unpack_state(v: np.ndarray) -> NVState:
    rho = v[_RHO].reshape(3, 3)
    rho = 0.5 * (rho + rho.conj().T)  # scrub roundoff asymmetry
    return NVState(rho_g=rho, p_e=v[_PE].real.copy(), p_s=float(v[_PS].real))


def liouvillian(segment: ControlSegment, params: NVParameters) -> np.ndarray:
    """Generator of the hybrid master equation for one constant segment."""
    rates = params.optical_rates
    lv = np.zeros((_DIM, _DIM), dtype=complex)
    eye3 = np.eye(3)

    # Coherent part: d rho = -i 2pi [H, rho] on the row-major vectorization.
    h = rotating_frame_hamiltonian(segment, params)
    comm = np.kron(h, eye3) - np.kron(eye3, h.T)
    lv[_RHO, _RHO] += -2j * np.pi * comm

    # Dephasing of ground coherences: optional Lindblad channel at 1/T2*,
    # plus the drive-induced channel while MW is on.
    gamma_phi = 0.0
    if params.lindblad_dephasing and math.isfinite(params.t2_star):
        gamma_phi += 1.0 / params.t2_star
    if segment.mw_on and params.drive_dephasing_rate > 0:
        gamma_phi += params.drive_dephasing_rate
    # Longitudinal relaxation: uniform population exchange at combined
    # rate 1/t1 toward the maximally mixed ground triplet.
    gamma_1 = 1.0 / params.t1 if math.isfinite(params.t1) else 0.0
    exch = gamma_1 / 3.0
    for i in range(3):
        for j in range(3):
            k = 3 * i + j
            if i != j:
                lv[k, k] += -(gamma_phi + 2.0 * exch)
            else:
                lv[k, k] += -2.0 * exch
                for m in range(3):
                    if m != i:
                        lv[k, 3 * m + m] += exch

    # Laser pumping: spin-conserving transfer of diagonal ground population
    # to the excited manifold; the same rate removes ground coherences.
    pump = rates.pump_rate_per_watt * segment.laser_power
    if pump > 0:
        for i in range(3):
            for j in range(3):
                lv[3 * i + j, 3 * i + j] += -pump
            lv[9 + i, 3 * i + i] += pump

    # Optical decays (classical rate equations).
    for i in range(3):
        k_isc = rates.k_isc_0 if i == IDX_ZERO else rates.k_isc_pm
        lv[9 + i, 9 + i] += -(rates.k_rad + k_isc)
        lv[3 * i + i, 9 + i] += rates.k_rad
        lv[_PS, 9 + i] += k_isc
    lv[_PS, _PS] += -(rates.k_s0 + 2.0 * rates.k_s_pm)
    lv[3 * IDX_ZERO + IDX_ZERO, _PS] += rates.k_s0
    lv[3 * IDX_PLUS + IDX_PLUS, _PS] += rates.k_s_pm
    lv[3 * IDX_MINUS + IDX_MINUS, _PS] += rates.k_s_pm

    # Emitted-photon integral.
    lv[_NPH, _PE] += rates.k_rad
    return lv


_prop_cache = {}
_PROP_CACHE_MAX = 8192


def _cache_key(segment: ControlSegment, params: NVParameters, dt: float):
    r = params.optical_rates
    return (dt, segment.laser_power, segment.mw_on, segment.mw_frequency,
            segment.mw_rabi, segment.mw_phase, segment.target_transition,
            segment.b_axis, segment.extra_detuning,
            params.d_zfs, params.gamma_e, params.t2_star, params.t1,
            params.lindblad_dephasing, params.drive_dephasing_rate,
            r.k_rad, r.k_isc_pm, r.k_isc_0, r.k_s0, r.k_s_pm,
            r.pump_rate_per_watt)


def propagator(segment: ControlSegment, params: NVParameters,
               dt: float) -> np.ndarray:
    """exp(L*dt) for the segment's generator, memoized."""
    key = _cache_key(segment, params, dt)
    p = _prop_cache.get(key)
    if p is None:
        if len(_prop_cache) >= _PROP_CACHE_MAX:
            _prop_cache.clear()
        p = expm(liouvillian(segment, params) * dt)
        _prop_cache[key] = p
    return p


@dataclass
class EvolveResult:
    state: NVState
    photons: float  # expected photons emitted during the segment


def evolve_with_photons(state: NVState, segment: ControlSegment,
                        params: NVParameters) -> EvolveResult:
    v = pack_state(state)
    v = propagator(segment, params, segment.duration) @ v
    return EvolveResult(state=unpack_state(v), photons=float(v[_NPH].real))


def evolve(state: NVState, segment: ControlSegment, params: NVParameters,
           dt_max: float = 1e-9) -> NVState:
    """Advance the hybrid state through one control segment.

    The propagation is an exact matrix exponential of the piecewise-constant
    generator, so results are independent of ``dt_max``; the argument is
    validated for interface compatibility with step-based integrators.
    """
    if dt_max <= 0:
        raise PhysicsError("dt_max must be > 0")
    return evolve_with_photons(state, segment, params).state


def emission_rate(state: NVState, params: NVParameters) -> float:
    """Instantaneous emitted-photon rate (photons/s, before collection)."""
    return float(params.optical_rates.k_rad * state.p_e.sum())


def emission_trace(state: NVState, segment: ControlSegment,
                   params: NVParameters, n_bins: int):
    """Photon-emission integrals on a uniform grid across the segment.

    Returns (bin_photons, final_state); bin_photons[i] is the expected
    number of photons emitted during the i-th sub-interval.
    """
    if n_bins < 1:
        raise PhysicsError("n_bins must be >= 1")
    dt = segment.duration / n_bins
    step = propagator(segment, params, dt)
    v = pack_state(state)
    photons = np.empty(n_bins)
    prev = 0.0
    for i in range(n_bins):
        v = step @ v
        cum = float(v[_NPH].real)
        photons[i] = cum - prev
        prev = cum
    return photons, unpack_state(v)


def polarize(params: NVParameters, laser_power: float, duration: float,
             state: NVState = None,
             target: float = POLARIZATION_TARGET) -> NVState:
    """Optically pump into |0>: laser pulse, then a dark wait long enough
    to drain both the excited manifold and the metastable singlet."""
    if duration < 0:
        raise PhysicsError("duration must be >= 0")
    if state is None:
        state = NVState.mixed_ground()
    if duration > 0 and laser_power > 0:
        state = evolve(state, ControlSegment(duration=duration,
                                             laser_power=laser_power), params)
    rates = params.optical_rates
    wait = max(10.0 * rates.max_excited_lifetime, 6.0 * rates.singlet_lifetime)
    state = evolve(state, ControlSegment(duration=wait), params)
    if duration > 0 and state.population(IDX_ZERO) < target:
        warn_polarization(state.population(IDX_ZERO), target)
    return state

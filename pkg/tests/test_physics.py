"""Spin/photo-physics engine: spectra, closed-form dynamics, relaxation."""

import math

import numpy as np
import pytest

from nvlab.physics import (IDX_MINUS, IDX_PLUS, IDX_ZERO, ControlSegment,
                           NVParameters, NVState, OpticalRates, PhysicsError,
                           ZERO_TO_MINUS, ZERO_TO_PLUS, evolve,
                           ground_hamiltonian, polarize,
                           rotating_frame_hamiltonian)
from nvlab.physics.model import AUTO_TARGET


def closed_params(**kw) -> NVParameters:
    return NVParameters(**kw).without_relaxation()


class TestGroundHamiltonian:
    def test_eigenvalues_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            d = rng.uniform(1e9, 5e9)
            b0 = rng.uniform(-10e-3, 10e-3)
            p = NVParameters(d_zfs=d)
            h = ground_hamiltonian(p, b0)
            got = np.sort(np.linalg.eigvalsh(h))
            want = np.sort([0.0, d + p.gamma_e * b0, d - p.gamma_e * b0])
            scale = max(abs(w) for w in want)
            assert np.max(np.abs(got - want)) <= 1e-9 * scale

    def test_zero_field_transitions_at_zfs(self):
        p = NVParameters()
        assert p.transition_frequency(ZERO_TO_PLUS, 0.0) == 2.87e9
        assert p.transition_frequency(ZERO_TO_MINUS, 0.0) == 2.87e9

    def test_transitions_split_linearly(self):
        p = NVParameters()
        bz = 356e-6
        assert (p.transition_frequency(ZERO_TO_PLUS, bz)
                - p.transition_frequency(ZERO_TO_MINUS, bz)
                ) == pytest.approx(2 * p.gamma_e * bz, rel=1e-12)


class TestRotatingFrame:
    def test_auto_target_picks_nearest_transition(self):
        p = NVParameters()
        bz = 1e-3
        f_plus = p.transition_frequency(ZERO_TO_PLUS, bz)
        f_minus = p.transition_frequency(ZERO_TO_MINUS, bz)
        for f_drive, idx in ((f_plus, IDX_PLUS), (f_minus, IDX_MINUS)):
            seg = ControlSegment(duration=1e-8, mw_on=True,
                                 mw_frequency=f_drive, mw_rabi=1e6,
                                 b_axis=bz)
            h = rotating_frame_hamiltonian(seg, p)
            assert abs(h[IDX_ZERO, idx]) == pytest.approx(0.5e6)

    def test_auto_target_tie_favors_plus(self):
        seg = ControlSegment(duration=1e-8, mw_on=True, mw_frequency=2.87e9,
                             mw_rabi=1e6)
        h = rotating_frame_hamiltonian(seg, NVParameters())
        assert abs(h[IDX_ZERO, IDX_PLUS]) == pytest.approx(0.5e6)
        assert h[IDX_ZERO, IDX_MINUS] == 0

    def test_explicit_target_respected(self):
        seg = ControlSegment(duration=1e-8, mw_on=True, mw_frequency=2.87e9,
                             mw_rabi=1e6, target_transition=ZERO_TO_MINUS)
        h = rotating_frame_hamiltonian(seg, NVParameters())
        assert abs(h[IDX_ZERO, IDX_MINUS]) == pytest.approx(0.5e6)


class TestCoherentDynamics:
    def test_on_resonance_rabi_matches_sin_squared(self):
        """Closed-system |1> population follows sin^2(pi*Omega*tau)."""
        p = closed_params()
        omega = 20.4e6
        worst = 0.0
        for tau in np.linspace(1e-9, 200e-9, 100):
            seg = ControlSegment(duration=float(tau), mw_on=True,
                                 mw_frequency=2.87e9, mw_rabi=omega)
            s = evolve(NVState.ground(), seg, p)
            want = math.sin(math.pi * omega * tau) ** 2
            worst = max(worst, abs(s.population(IDX_PLUS) - want))
        assert worst < 1e-3

    def test_detuned_rabi_max_transfer(self):
        """Peak transfer is Omega^2 / (Omega^2 + Delta^2)."""
        p = closed_params()
        omega, delta = 20.4e6, 10e6
        omega_g = math.hypot(omega, delta)
        tau_peak = 1.0 / (2.0 * omega_g)
        seg = ControlSegment(duration=tau_peak, mw_on=True,
                             mw_frequency=2.87e9 - delta, mw_rabi=omega,
                             target_transition=ZERO_TO_PLUS)
        s = evolve(NVState.ground(), seg, p)
        want = omega ** 2 / (omega ** 2 + delta ** 2)
        assert abs(s.population(IDX_PLUS) - want) < 1e-3

    def test_generalized_rabi_closed_form(self):
        """Detuned evolution matches the two-level formula to 1e-6."""
        p = closed_params()
        omega, delta = 15e6, 7e6
        omega_g = math.hypot(omega, delta)
        for tau in (10e-9, 37e-9, 90e-9, 160e-9):
            seg = ControlSegment(duration=tau, mw_on=True,
                                 mw_frequency=2.87e9 + delta, mw_rabi=omega,
                                 target_transition=ZERO_TO_PLUS)
            s = evolve(NVState.ground(), seg, p)
            want = (omega ** 2 / omega_g ** 2
                    * math.sin(math.pi * omega_g * tau) ** 2)
            assert s.population(IDX_PLUS) == pytest.approx(want, abs=1e-6)

    def test_population_conserved(self):
        p = closed_params()
        s = NVState.ground()
        rng = np.random.default_rng(3)
        for _ in range(10):
            seg = ControlSegment(duration=float(rng.uniform(1e-9, 1e-7)),
                                 mw_on=True, mw_frequency=2.87e9,
                                 mw_rabi=float(rng.uniform(1e6, 3e7)),
                                 mw_phase=float(rng.uniform(0, 2 * math.pi)))
            s = evolve(s, seg, p)
            s.validate(tol=1e-7)


class TestRelaxation:
    def test_lindblad_ramsey_coherence_decay(self):
        """Pure Lindblad dephasing decays coherence as exp(-t/T2*)."""
        t2 = 320e-9
        p = NVParameters(t2_star=t2, t1=math.inf, lindblad_dephasing=True,
                         drive_dephasing_rate=0.0)
        psi = np.zeros(3, dtype=complex)
        psi[IDX_ZERO] = psi[IDX_PLUS] = 1 / math.sqrt(2)
        s0 = NVState(rho_g=np.outer(psi, psi.conj()), p_e=np.zeros(3), p_s=0.0)
        for t in np.linspace(0.1 * t2, 3 * t2, 12):
            s = evolve(s0, ControlSegment(duration=float(t)), p)
            coh = abs(s.rho_g[IDX_ZERO, IDX_PLUS])
            want = 0.5 * math.exp(-t / t2)
            assert coh == pytest.approx(want, rel=1e-2)

    def test_t1_drives_populations_to_mixed(self):
        p = NVParameters(t1=1e-3)
        s = evolve(NVState.ground(), ControlSegment(duration=20e-3), p)
        for i in range(3):
            assert s.population(i) == pytest.approx(1 / 3, abs=1e-6)

    def test_polarize_reaches_target(self):
        p = NVParameters()
        s = polarize(p, laser_power=1e-3, duration=3e-6)
        assert s.population(IDX_ZERO) > 0.85
        assert s.p_e.sum() < 1e-6 and s.p_s < 1e-3


class TestOpticalRates:
    def test_excited_lifetime_preset(self):
        r = OpticalRates().with_excited_lifetime(12e-9)
        assert r.excited_lifetime(IDX_ZERO) == pytest.approx(12e-9)
        base = OpticalRates()
        assert (r.k_isc_pm / r.k_rad
                == pytest.approx(base.k_isc_pm / base.k_rad))

    def test_rate_ordering_enforced(self):
        with pytest.raises(PhysicsError):
            OpticalRates(k_isc_pm=1e6, k_isc_0=2e6)
        with pytest.raises(PhysicsError):
            OpticalRates(k_s0=0.1e6, k_s_pm=0.2e6)


class TestValidation:
    def test_axis_must_be_unit(self):
        with pytest.raises(PhysicsError):
            NVParameters(axis=[0, 0, 2])

    def test_t1_floor(self):
        with pytest.raises(PhysicsError):
            NVParameters(t2_star=1e-3, t1=1e-4)

    def test_segment_duration_positive(self):
        with pytest.raises(PhysicsError):
            ControlSegment(duration=0.0)

    def test_unknown_target_rejected(self):
        with pytest.raises(PhysicsError):
            ControlSegment(duration=1e-9, target_transition="sideways")
        assert AUTO_TARGET == "auto"

    def test_state_validate_catches_bad_total(self):
        s = NVState.ground((0.5, 0.2, 0.1))
        with pytest.raises(PhysicsError):
            s.validate()

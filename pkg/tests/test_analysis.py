"""Fitting library: Jacobians, round trips, seeding, field extraction."""

import math

import numpy as np
import pytest

from nvlab.analysis import (FitError, ModelSpec, RABI_BOUNDS, bz_from_splitting,
                            dip_centers, eval_model, fit, fit_exp_decay,
                            fit_lorentzian_dips, fit_rabi,
                            fit_ramsey_envelope, fit_stretched_exp, get_model,
                            peak_find, pulse_calibration)

# Random parameter points per model for the Jacobian check, on x ~ O(1)
# grids so central differences are well conditioned.
_JAC_CASES = [
    ("exp_decay", 1, lambda r: [r.uniform(0.5, 2), r.uniform(0.5, 3),
                                r.uniform(-1, 1)]),
    ("rabi_eq4", 1, lambda r: [r.uniform(0.5, 2), r.uniform(0.3, 1.5),
                               r.uniform(-1, 1), r.uniform(1, 5),
                               r.uniform(-1, 1)]),
    ("gaussian_peak", 1, lambda r: [r.uniform(0.5, 2), r.uniform(2, 8),
                                    r.uniform(0.5, 2), r.uniform(-1, 1)]),
    ("stretched_exp", 1, lambda r: [r.uniform(0.5, 2), r.uniform(0.5, 3),
                                    r.uniform(0.7, 2.5), r.uniform(-1, 1)]),
    ("lorentzian_multi", 1, lambda r: [r.uniform(0.5, 2), r.uniform(0.05, 0.5),
                                       r.uniform(2, 8), r.uniform(0.5, 2)]),
    ("lorentzian_multi", 2, lambda r: [r.uniform(0.5, 2),
                                       r.uniform(0.05, 0.5), r.uniform(2, 5),
                                       r.uniform(0.5, 2),
                                       r.uniform(0.05, 0.5), r.uniform(5, 8),
                                       r.uniform(0.5, 2)]),
]


class TestJacobians:
    @pytest.mark.parametrize("kind,n_peaks,draw", _JAC_CASES,
                             ids=lambda v: str(v))
    def test_matches_finite_differences(self, kind, n_peaks, draw):
        model = get_model(kind, n_peaks)
        x = np.linspace(0.1, 10.0, 57)
        rng = np.random.default_rng(11)
        for _ in range(10):
            p = np.array(draw(rng), dtype=float)
            jac = model.jacobian(p, x)
            scale = np.max(np.abs(jac))
            for k in range(len(p)):
                h = 1e-6 * max(abs(p[k]), 1.0)
                pp, pm = p.copy(), p.copy()
                pp[k] += h
                pm[k] -= h
                fd = (model(pp, x) - model(pm, x)) / (2 * h)
                assert np.max(np.abs(jac[:, k] - fd)) <= 1e-6 * scale


class TestFitter:
    def test_noiseless_rabi_fixpoint(self):
        """Exact model data is recovered to 1e-6 relative."""
        truth = {"a": 0.13, "omega": 20.4e6, "phi": 0.2, "t2_star": 320e-9,
                 "c": 0.87}
        spec = ModelSpec("rabi_eq4", {"a": 0.1, "omega": 18e6, "phi": 0.0,
                                      "t2_star": 250e-9, "c": 0.8},
                         bounds=RABI_BOUNDS)
        x = np.linspace(0.0, 400e-9, 161)
        y = eval_model(spec, truth, x)
        res = fit(spec, x, y)
        assert res.converged
        for name, want in truth.items():
            assert res.value(name) == pytest.approx(want, rel=1e-6)

    def test_two_lorentzian_centers_recovered(self):
        """The 19.94 MHz / 11 MHz FWHM overlapping-dip stress case."""
        c_lo = 2.87e9 - 9.97e6
        c_hi = 2.87e9 + 9.97e6
        x = np.linspace(2.87e9 - 40e6, 2.87e9 + 40e6, 301)
        spec = ModelSpec("lorentzian_multi",
                         {"offset": 1.0, "a0": 0.02, "center0": c_lo,
                          "fwhm0": 11e6, "a1": 0.02, "center1": c_hi,
                          "fwhm1": 11e6}, n_peaks=2)
        truth = dict(spec.initial_guess)
        rng = np.random.default_rng(5)
        y = eval_model(spec, truth, x) + rng.normal(0.0, 1.5e-3, len(x))
        res = fit_lorentzian_dips(x, y, np.full(len(x), 1.5e-3))
        centers = dip_centers(res)
        assert len(centers) == 2
        assert abs(centers[0][0] - c_lo) < 0.5e6
        assert abs(centers[1][0] - c_hi) < 0.5e6

    def test_scale_equivariance(self):
        """Scaling y and sigma scales amplitude/offset, fixes the rest."""
        x = np.linspace(0.0, 8.0, 101)
        rng = np.random.default_rng(9)
        y = 1.3 * np.exp(-x / 2.1) + 0.4 + rng.normal(0, 0.01, len(x))
        sigma = np.full(len(x), 0.01)
        r1 = fit_exp_decay(x, y, sigma)
        r2 = fit_exp_decay(x, 50.0 * y, 50.0 * sigma)
        assert r2.value("amplitude") == pytest.approx(
            50.0 * r1.value("amplitude"), rel=1e-6)
        assert r2.value("offset") == pytest.approx(
            50.0 * r1.value("offset"), rel=1e-6)
        assert r2.value("tau") == pytest.approx(r1.value("tau"), rel=1e-6)

    def test_nonconvergence_is_flagged(self):
        x = np.linspace(0, 1, 10)
        rng = np.random.default_rng(1)
        y = rng.normal(0, 1, len(x))
        try:
            res = fit_rabi(x, y)
        except FitError:
            return
        if not res.converged:
            assert res.n_iter > 0

    def test_ramsey_envelope_handles_rising_signal(self):
        x = np.linspace(0.0, 1e-6, 61)
        y = 0.9 - 0.12 * np.exp(-((x / 320e-9) ** 2))
        res = fit_ramsey_envelope(x, y)
        assert res.converged
        assert res.value("amplitude") < 0
        assert res.value("tau") == pytest.approx(320e-9, rel=1e-3)

    def test_stretched_exponent_free(self):
        x = np.linspace(1e-9, 3e-6, 121)
        y = 0.1 * np.exp(-((x / 940e-9) ** 1.7)) + 0.85
        res = fit_stretched_exp(x, y)
        assert res.value("exponent") == pytest.approx(1.7, rel=1e-3)


class TestFieldExtraction:
    def test_eq3_values(self):
        bz, u = bz_from_splitting(2.87e9 + 9.968e6, 2.87e9 - 9.968e6)
        assert bz == pytest.approx(356e-6, rel=1e-3)
        assert u == 0.0

    def test_linearity(self):
        b1, _ = bz_from_splitting(2.87e9 + 5e6, 2.87e9 - 5e6)
        b2, _ = bz_from_splitting(2.87e9 + 10e6, 2.87e9 - 10e6)
        assert b2 == pytest.approx(2 * b1, rel=1e-12)

    def test_uncertainty_propagation(self):
        _, u = bz_from_splitting(2.88e9, 2.86e9, sigma_plus=0.014e6,
                                 sigma_minus=0.014e6)
        assert u == pytest.approx(math.hypot(0.014e6, 0.014e6) / 56e9)
        assert u == pytest.approx(0.354e-6, rel=1e-2)

    def test_ordering_required(self):
        with pytest.raises(ValueError):
            bz_from_splitting(2.86e9, 2.88e9)


class TestPulseCalibration:
    def test_paper_values(self):
        tau_pi, tau_pi_2 = pulse_calibration(20.4e6)
        assert tau_pi == pytest.approx(24.5e-9)
        assert tau_pi_2 == pytest.approx(12.25e-9)

    def test_arithmetic(self):
        assert pulse_calibration(10e6) == (pytest.approx(50e-9),
                                           pytest.approx(25e-9))

    def test_grid_snap_absorbs_small_offsets(self):
        assert pulse_calibration(20.408e6) == pulse_calibration(20.4e6)

    def test_requires_positive_omega(self):
        with pytest.raises(ValueError):
            pulse_calibration(0.0)


class TestPeakFind:
    def _dip(self, x, c, w, a):
        return a * (w / 2) ** 2 / ((x - c) ** 2 + (w / 2) ** 2)

    def test_single_dip(self):
        x = np.linspace(0, 100, 201)
        y = 1.0 - self._dip(x, 42.0, 8.0, 0.3)
        found = peak_find(x, y, max_peaks=2)
        assert len(found) >= 1
        assert abs(found[0] - 42.0) <= 2 * (x[1] - x[0])

    def test_flat_spectrum_empty(self):
        rng = np.random.default_rng(2)
        x = np.linspace(0, 100, 201)
        y = 1.0 + rng.normal(0, 0.001, len(x))
        assert peak_find(x, y) == []

    def test_symmetric_double_dip_tie_break(self):
        x = np.linspace(0, 100, 401)
        y = 1.0 - self._dip(x, 30.0, 6.0, 0.3) - self._dip(x, 70.0, 6.0, 0.3)
        found = peak_find(x, y, max_peaks=2)
        assert len(found) == 2
        assert found[0] < found[1]

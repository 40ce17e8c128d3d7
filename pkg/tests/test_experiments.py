"""Experiment drivers: scans, sweeps, metadata, abort handling."""

import numpy as np
import pytest

from nvlab.experiments import (ExperimentError, autofocus, confocal_scan,
                               cw_odmr, rabi)
from nvlab.io import default_config


def fresh_lab(seed=12345):
    return default_config(seed=seed).build_lab()


class TestConfocalScan:
    REGION = ((49.0, 51.0), (49.0, 51.0))

    def test_localizes_emitter_within_one_pixel(self, lab):
        ds = confocal_scan(lab, self.REGION, resolution=0.1, dwell=1e-3)
        assert ds.kind == "scan2d"
        # values are row-major over (y, x)
        iy, ix = np.unravel_index(np.argmax(ds.values), ds.values.shape)
        x = ds.axes[1].values[ix]
        y = ds.axes[0].values[iy]
        true_pos = lab.sample.emitters[0].position
        assert abs(x - true_pos[0]) <= 0.1
        assert abs(y - true_pos[1]) <= 0.1

    def test_deterministic_for_same_seed(self):
        d1 = confocal_scan(fresh_lab(), self.REGION, 0.2, dwell=1e-3)
        d2 = confocal_scan(fresh_lab(), self.REGION, 0.2, dwell=1e-3)
        np.testing.assert_array_equal(d1.values, d2.values)

    def test_abort_marks_dataset_and_leaves_nans(self, lab):
        calls = []

        def should_abort():
            calls.append(1)
            return len(calls) > 5

        ds = confocal_scan(lab, self.REGION, 0.1, dwell=1e-3,
                           should_abort=should_abort)
        assert ds.aborted
        assert np.isnan(ds.values).any()
        assert np.isfinite(ds.values).any()

    def test_region_validation(self, lab):
        with pytest.raises(ExperimentError):
            confocal_scan(lab, ((-1.0, 2.0), (49.0, 51.0)), 0.1)
        with pytest.raises(ExperimentError):
            confocal_scan(lab, ((49.0, 51.0), (99.0, 120.0)), 0.1)
        with pytest.raises(ExperimentError):
            confocal_scan(lab, self.REGION, -0.1)

    def test_progress_reports_rows(self, lab):
        seen = []
        confocal_scan(lab, self.REGION, 0.25, dwell=1e-3,
                      progress=lambda done, total, info:
                          seen.append((done, total)))
        assert seen[-1][0] == seen[-1][1]
        assert [d for d, _ in seen] == sorted(d for d, _ in seen)

    def test_metadata_records_settings(self, lab):
        ds = confocal_scan(lab, self.REGION, 0.25, dwell=2e-3)
        md = ds.metadata
        assert md["experiment"] == "confocal_scan"
        assert md["parameters"]["dwell"] == 2e-3
        assert md["seed"] == 12345
        assert md["instrument"]["sample"] == lab.sample.name


class TestAutofocus:
    def test_recovers_offset_guess(self, lab):
        true_pos = lab.sample.emitters[0].position
        guess = true_pos + np.array([0.15, -0.12, 0.3])
        result = autofocus(lab, guess, span=1.0, points=41)
        np.testing.assert_allclose(result.position, true_pos, atol=0.05)

    def test_guess_validation(self, lab):
        with pytest.raises(ExperimentError):
            autofocus(lab, [50.0, 50.0])
        with pytest.raises(ExperimentError):
            autofocus(lab, [50.0, 50.0, 200.0])


class TestCWODMR:
    def test_zero_field_single_dip(self, lab):
        ds = cw_odmr(lab, 2.85e9, 2.89e9, points=81, repeats=256)
        assert ds.kind == "spectrum"
        fit = ds.fits[-1]
        assert fit.converged
        assert fit.model == "lorentzian_multi(1)"
        center, _ = fit.parameters["center0"]
        assert center == pytest.approx(2.87e9, abs=1.5e6)
        assert ds.metadata["dip_centers_hz"] == [center]
        assert fit.parameters["a0"][0] > 0.01

    def test_point_count_validation(self, lab):
        with pytest.raises(ExperimentError):
            cw_odmr(lab, 2.85e9, 2.89e9, points=1)


class TestPulsedSweeps:
    def test_rabi_dataset_shape_and_metadata(self, lab):
        ds = rabi(lab, 0.0, 200e-9, points=41, mw_frequency=2.87e9,
                  omega=20.4e6, shots=20000)
        assert ds.kind == "sweep"
        assert len(ds.axes[0].values) == 41
        assert ds.uncertainty is not None
        assert (ds.uncertainty > 0).all()
        md = ds.metadata
        assert md["tau_pi"] == pytest.approx(24.5e-9, abs=1e-9)
        assert md["tau_pi_2"] == pytest.approx(12.25e-9, abs=0.5e-9)
        fit = ds.fits[-1]
        assert fit.converged
        assert fit.parameters["omega"][0] == pytest.approx(20.4e6, rel=0.05)

    def test_rabi_deterministic(self):
        d1 = rabi(fresh_lab(), 0.0, 100e-9, 11, 2.87e9, 20.4e6, shots=5000)
        d2 = rabi(fresh_lab(), 0.0, 100e-9, 11, 2.87e9, 20.4e6, shots=5000)
        np.testing.assert_array_equal(d1.values, d2.values)
        np.testing.assert_array_equal(d1.uncertainty, d2.uncertainty)

    def test_rabi_abort_partial(self, lab):
        n = [0]

        def should_abort():
            n[0] += 1
            return n[0] > 5

        ds = rabi(lab, 0.0, 200e-9, 41, 2.87e9, 20.4e6, shots=5000,
                  should_abort=should_abort)
        assert ds.aborted
        assert np.isnan(ds.values).any()

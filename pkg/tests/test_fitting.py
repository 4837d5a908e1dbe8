"""Lorentzian and rational-pole fits for resonance extraction."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from resoscan.errors import AmbiguousPeakError, FitError, ValidationError
from resoscan.fitting import (
    FitReport,
    Resonance,
    detect_peaks,
    estimate_fwhm,
    fit_lorentzian,
    lorentzian,
    pade_fit,
)


class TestResonance:
    def test_rejects_nonpositive_width(self):
        with pytest.raises(ValidationError, match="width must be positive"):
            Resonance(e_r_mev=4.0, gamma_kev=0.0, e_r_err_mev=0.0,
                      gamma_err_kev=0.0, method="window-fit")

    def test_rejects_negative_uncertainties(self):
        with pytest.raises(ValidationError, match="non-negative"):
            Resonance(e_r_mev=4.0, gamma_kev=2.0, e_r_err_mev=-1e-3,
                      gamma_err_kev=0.0, method="window-fit")


class TestLorentzian:
    def test_peak_and_half_maximum_values(self):
        e_r, gamma = 4.1, 0.02
        peak = lorentzian(e_r, e_r, gamma)
        npt.assert_allclose(peak, 2.0 / (math.pi * gamma), rtol=1e-14)
        npt.assert_allclose(lorentzian(e_r + gamma / 2, e_r, gamma), peak / 2, rtol=1e-12)
        npt.assert_allclose(lorentzian(e_r - gamma / 2, e_r, gamma), peak / 2, rtol=1e-12)

    def test_unit_area(self):
        e_r, gamma = 4.0, 0.05
        e = np.linspace(e_r - 400 * gamma, e_r + 400 * gamma, 2_000_001)
        area = np.trapezoid(lorentzian(e, e_r, gamma), e)
        # finite tails hold 2/pi * atan(800) of the unit mass
        npt.assert_allclose(area, 2.0 / math.pi * math.atan(800.0), rtol=1e-8)

    def test_rejects_nonpositive_width(self):
        with pytest.raises(ValidationError, match="gamma must be positive"):
            lorentzian(4.0, 4.0, 0.0)


class TestDetectPeaks:
    def test_single_clean_peak(self):
        e = np.linspace(3.0, 5.0, 201)
        y = lorentzian(e, 4.0, 0.1)
        assert detect_peaks(e, y) == [int(np.argmax(y))]

    def test_two_separated_peaks(self):
        e = np.linspace(3.0, 5.0, 401)
        y = lorentzian(e, 3.6, 0.05) + lorentzian(e, 4.4, 0.05)
        found = detect_peaks(e, y)
        assert len(found) == 2
        npt.assert_allclose(e[found], [3.6, 4.4], atol=0.01)

    def test_flat_data_has_no_peaks(self):
        e = np.linspace(0.0, 10.0, 101)
        assert detect_peaks(e, np.ones(101)) == []

    def test_bump_below_noise_floor_ignored(self):
        # the 3x-median floor suppresses small features on a flat background
        e = np.linspace(0.0, 10.0, 101)
        small = np.ones(101)
        small[50] = 2.5
        tall = np.ones(101)
        tall[50] = 4.0
        assert detect_peaks(e, small) == []
        assert detect_peaks(e, tall) == [50]

    def test_too_short_input(self):
        assert detect_peaks(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == []


class TestEstimateFwhm:
    def test_recovers_lorentzian_width(self):
        e = np.linspace(3.0, 5.0, 4001)
        y = lorentzian(e, 4.0, 0.1)
        width = estimate_fwhm(e, y, int(np.argmax(y)))
        npt.assert_allclose(width, 0.1, rtol=1e-3)

    def test_interpolates_between_samples(self):
        # coarse grid: crossings fall between samples, recovered by the
        # linear interpolation to a few percent
        e = np.linspace(3.0, 5.0, 81)
        y = lorentzian(e, 4.0, 0.17)
        width = estimate_fwhm(e, y, int(np.argmax(y)))
        npt.assert_allclose(width, 0.17, rtol=0.05)

    def test_truncated_shoulder_extends_to_data_edge(self):
        # half-maximum never reached on the left: span runs to e[0]
        e = np.linspace(4.0, 4.5, 101)
        y = lorentzian(e, 4.02, 0.3)
        ipk = int(np.argmax(y))
        width = estimate_fwhm(e, y, ipk)
        assert width > 0.0


class TestFitLorentzian:
    def test_noiseless_recovery_is_exact(self):
        e = np.linspace(4.0, 4.2, 201)
        y = 2.3 * lorentzian(e, 4.1037, 0.0173)
        report = fit_lorentzian(e, y, j=2, r_max_fm=3000.0)
        res = report.resonance
        npt.assert_allclose(res.e_r_mev, 4.1037, rtol=1e-6)
        npt.assert_allclose(res.gamma_kev, 17.3, rtol=1e-6)
        npt.assert_allclose(report.amplitude, 2.3, rtol=1e-6)
        assert report.converged
        assert report.chi2_reduced < 1e-16
        assert res.method == "window-fit"
        assert res.j == 2
        assert res.r_max_fm == 3000.0

    def test_constant_background_is_separated(self):
        e = np.linspace(4.0, 4.2, 201)
        y = 2.3 * lorentzian(e, 4.1037, 0.0173) + 0.37
        report = fit_lorentzian(e, y, with_background=True)
        npt.assert_allclose(report.background, 0.37, rtol=1e-6)
        npt.assert_allclose(report.resonance.gamma_kev, 17.3, rtol=1e-6)

    def test_window_restricts_the_samples(self):
        e = np.linspace(3.0, 5.0, 801)
        y = 2.3 * lorentzian(e, 4.1, 0.02) + 5.0 * lorentzian(e, 3.2, 0.02)
        report = fit_lorentzian(e, y, window_mev=(4.0, 4.2))
        npt.assert_allclose(report.resonance.e_r_mev, 4.1, atol=1e-5)
        assert report.window_mev == (4.0, 4.2)

    def test_explicit_initial_guess_honored(self):
        e = np.linspace(4.0, 4.2, 201)
        y = 2.3 * lorentzian(e, 4.1037, 0.0173)
        report = fit_lorentzian(e, y, init=(4.09, 0.03))
        npt.assert_allclose(report.resonance.e_r_mev, 4.1037, rtol=1e-8)

    def test_noisy_fit_reports_positive_errors(self, rng):
        e = np.linspace(4.0, 4.2, 201)
        clean = 2.3 * lorentzian(e, 4.1037, 0.0173)
        y = clean + rng.normal(0.0, 0.02 * clean.max(), clean.size)
        res = fit_lorentzian(e, y).resonance
        assert res.e_r_err_mev > 0.0
        assert res.gamma_err_kev > 0.0
        assert abs(res.e_r_mev - 4.1037) < 5.0 * res.e_r_err_mev
        assert abs(res.gamma_kev - 17.3) < 5.0 * res.gamma_err_kev

    def test_rejects_mismatched_arrays(self):
        with pytest.raises(ValidationError, match="equal length"):
            fit_lorentzian(np.arange(5.0), np.arange(6.0))

    def test_needs_enough_samples_in_window(self):
        e = np.linspace(4.0, 4.2, 201)
        y = lorentzian(e, 4.1, 0.02)
        with pytest.raises(ValidationError, match="at least 8 samples"):
            fit_lorentzian(e, y, window_mev=(4.099, 4.101))

    def test_all_zero_window_is_a_fit_error(self):
        e = np.linspace(4.0, 4.2, 51)
        with pytest.raises(FitError, match="no positive density"):
            fit_lorentzian(e, np.zeros_like(e))

    def test_two_comparable_peaks_are_ambiguous(self):
        e = np.linspace(3.8, 4.6, 321)
        y = lorentzian(e, 4.0, 0.05) + lorentzian(e, 4.4, 0.05)
        with pytest.raises(AmbiguousPeakError, match="pade_fit"):
            fit_lorentzian(e, y)


class TestPadeFit:
    def test_single_pole_orders_match_exactly(self):
        e = np.linspace(4.0, 4.2, 201)
        y = 2.3 * lorentzian(e, 4.1, 0.02)
        out = pade_fit(e, y, orders=(0, 2), j=0)
        assert len(out) == 1
        npt.assert_allclose(out[0].e_r_mev, 4.1, rtol=1e-10)
        npt.assert_allclose(out[0].gamma_kev, 20.0, rtol=1e-10)
        assert out[0].j == 0

    def test_overlapping_pair_resolved(self):
        e = np.linspace(3.8, 4.5, 281)
        y = 1.0 * lorentzian(e, 4.0, 0.06) + 0.8 * lorentzian(e, 4.15, 0.08)
        out = pade_fit(e, y, orders=(2, 4))
        assert [r.e_r_mev for r in out] == sorted(r.e_r_mev for r in out)
        npt.assert_allclose([r.e_r_mev for r in out], [4.0, 4.15], rtol=1e-9)
        npt.assert_allclose([r.gamma_kev for r in out], [60.0, 80.0], rtol=1e-9)

    def test_overparameterized_orders_on_rational_data_rejected(self):
        # a single Lorentzian is a (0,2) rational; (3,4) is non-unique
        e = np.linspace(4.0, 4.2, 201)
        y = 2.3 * lorentzian(e, 4.1, 0.02)
        with pytest.raises(FitError, match="rank-deficient"):
            pade_fit(e, y, orders=(3, 4))

    def test_smooth_background_yields_no_poles(self):
        e = np.linspace(4.0, 4.2, 201)
        y = 1.0 + 0.1 * (e - 4.1) + 0.2 * (e - 4.1) ** 2
        assert pade_fit(e, y, orders=(2, 2)) == []

    def test_rejects_bad_orders(self):
        e = np.linspace(4.0, 4.2, 31)
        with pytest.raises(ValidationError, match="orders"):
            pade_fit(e, np.ones_like(e), orders=(2, 0))
        with pytest.raises(ValidationError, match="orders"):
            pade_fit(e, np.ones_like(e), orders=(-1, 2))

    def test_needs_enough_samples(self):
        e = np.linspace(4.0, 4.2, 5)
        with pytest.raises(ValidationError, match="at least"):
            pade_fit(e, np.ones_like(e), orders=(2, 4))

    def test_rejects_zero_span(self):
        e = np.full(12, 4.1)
        with pytest.raises(ValidationError, match="zero energy range"):
            pade_fit(e, np.ones_like(e), orders=(0, 2))

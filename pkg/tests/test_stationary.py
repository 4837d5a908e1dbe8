"""Stationary-scattering machinery: Coulomb waves, radial integration,
phase shifts, phase-curve resonance inversion, and S-matrix pole fits."""

import math

import mpmath
import numpy as np
import numpy.testing as npt
import pytest
from scipy.special import spherical_jn

from resoscan.errors import (
    AntiResonanceError,
    DomainError,
    NotFoundError,
    NumericalError,
    PoleInstabilityError,
    ValidationError,
)
from resoscan.potential import SurrogatePotential, SystemParams, centrifugal_term
from resoscan.stationary import (
    PhaseShiftCurve,
    SMatrixSample,
    compute_phase_curve,
    coulomb_functions,
    find_pole,
    integrate_tise,
    load_phase_curve,
    phase_shift,
    resonance_from_phase,
    s_matrix,
    sample_s_matrix,
    save_phase_curve,
)

mpmath.mp.dps = 30


def neutral_params():
    return SystemParams(charge_product=0.0)


class SquareWell:
    """Attractive square well; the edge should sit midway between the
    integration samples so the step is represented without an O(dr) bias."""

    def __init__(self, depth_mev, radius_fm):
        self.depth_mev = depth_mev
        self.radius_fm = radius_fm

    def bare(self, r, params):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.radius_fm, -self.depth_mev, 0.0)


def make_curve(fn, e_lo, e_hi, n):
    """Synthetic PhaseShiftCurve around a scalar delta(E) callable."""
    energies = np.linspace(e_lo, e_hi, n)
    raw = np.array([fn(e) for e in energies])
    return PhaseShiftCurve(
        j=0,
        energies_mev=energies,
        delta_raw=raw,
        delta=np.unwrap(raw, period=math.pi),
        eta=np.zeros(n),
        evaluator=fn,
    )


def wrap_half_pi(x):
    y = math.fmod(x, math.pi)
    if y > 0.5 * math.pi:
        y -= math.pi
    elif y <= -0.5 * math.pi:
        y += math.pi
    return y


def breit_wigner_phase(e_r, gamma):
    return lambda e: wrap_half_pi(math.atan2(gamma / 2.0, e_r - e))


class TestCoulombFunctions:
    @pytest.mark.parametrize(
        "l, eta, rho",
        [(0, 5.669496150842896, 20.0), (2, 5.0, 25.0), (4, 6.7, 30.0), (1, 0.5, 9.0)],
    )
    def test_matches_arbitrary_precision_reference(self, l, eta, rho):
        f, fp, g, gp = coulomb_functions(l, eta, rho)
        ref_f = float(mpmath.coulombf(l, eta, rho))
        ref_g = float(mpmath.coulombg(l, eta, rho))
        ref_fp = float(mpmath.diff(lambda r: mpmath.coulombf(l, eta, r), rho))
        ref_gp = float(mpmath.diff(lambda r: mpmath.coulombg(l, eta, r), rho))
        npt.assert_allclose(f, ref_f, rtol=1e-12)
        npt.assert_allclose(g, ref_g, rtol=1e-12)
        npt.assert_allclose(fp, ref_fp, rtol=1e-12)
        npt.assert_allclose(gp, ref_gp, rtol=1e-12)

    @pytest.mark.parametrize(
        "l, eta, rho",
        [(0, 5.669496150842896, 20.0), (2, 5.0, 25.0), (4, 6.7, 30.0), (0, 0.0, 7.3)],
    )
    def test_wronskian_identity(self, l, eta, rho):
        f, fp, g, gp = coulomb_functions(l, eta, rho)
        npt.assert_allclose(fp * g - f * gp, 1.0, rtol=1e-10)

    def test_neutral_case_reduces_to_sine_and_cosine(self):
        rho = 7.3
        f, fp, g, gp = coulomb_functions(0, 0.0, rho)
        npt.assert_allclose(f, math.sin(rho), rtol=1e-13)
        npt.assert_allclose(g, math.cos(rho), rtol=1e-13)
        npt.assert_allclose(fp, math.cos(rho), rtol=1e-13)
        npt.assert_allclose(gp, -math.sin(rho), rtol=1e-13)

    @pytest.mark.parametrize("l", [-1, 1.5])
    def test_rejects_bad_angular_momentum(self, l):
        with pytest.raises(ValidationError, match="non-negative integer"):
            coulomb_functions(l, 2.0, 10.0)

    @pytest.mark.parametrize("rho", [0.0, -3.0])
    def test_rejects_nonpositive_radius(self, rho):
        with pytest.raises(ValidationError, match="rho must be positive"):
            coulomb_functions(0, 2.0, rho)

    def test_deep_below_turning_point_is_out_of_domain(self):
        # turning point for eta = 10, l = 0 is near rho = 20
        with pytest.raises(DomainError):
            coulomb_functions(0, 10.0, 2.0)


class TestIntegrateTise:
    def test_free_wave_is_proportional_to_sine(self):
        params = neutral_params()
        e_mev, dr, n = 4.0, 0.01, 2500
        k = math.sqrt(e_mev / params.kinetic_prefactor)
        u = integrate_tise(lambda r: np.zeros_like(r), params, e_mev, 0, dr, n)
        radii = dr * np.arange(1, n + 1)
        ratio = u / np.sin(k * radii)
        assert np.ptp(ratio) / np.mean(ratio) < 1e-5

    def test_centrifugal_wave_is_proportional_to_spherical_bessel(self):
        params = neutral_params()
        e_mev, dr, n = 4.0, 0.01, 2500
        k = math.sqrt(e_mev / params.kinetic_prefactor)
        u = integrate_tise(
            lambda r: centrifugal_term(params, 2, r), params, e_mev, 2, dr, n
        )
        radii = dr * np.arange(1, n + 1)
        reference = k * radii * spherical_jn(2, k * radii)
        outside = radii > 5.0
        ratio = u[outside] / reference[outside]
        assert np.ptp(ratio) / np.mean(ratio) < 1e-5

    def test_under_barrier_growth_is_rescaled_not_overflowed(self):
        # exp(kappa * 120 fm) would overflow float64 without rescaling
        params = neutral_params()
        u = integrate_tise(
            lambda r: np.full_like(r, 100.0), params, 1.0, 0, 0.01, 12000
        )
        assert np.all(np.isfinite(u))
        kappa = math.sqrt(99.0 / params.kinetic_prefactor)
        log_slope = math.log(u[-1] / u[-2]) / 0.01
        npt.assert_allclose(log_slope, kappa, rtol=1e-6)

    def test_too_coarse_step_for_wavelength_rejected(self):
        with pytest.raises(Exception, match="reduce dr below") as excinfo:
            integrate_tise(
                lambda r: np.zeros_like(r), neutral_params(), 400.0, 0, 0.05, 100
            )
        assert excinfo.type.__name__ == "ResolutionError"

    def test_rejects_nonpositive_energy(self):
        with pytest.raises(ValidationError):
            integrate_tise(lambda r: np.zeros_like(r), neutral_params(), 0.0, 0, 0.01, 100)

    def test_rejects_too_few_steps(self):
        with pytest.raises(ValidationError):
            integrate_tise(lambda r: np.zeros_like(r), neutral_params(), 4.0, 0, 0.01, 4)


class TestPhaseShift:
    def test_square_well_matches_analytic_phase(self):
        # tan(ka + delta) = (k/K) tan(Ka) for an l = 0 well with no Coulomb
        params = neutral_params()
        dr = 1e-4
        radius = (round(3.0 / dr) + 0.5) * dr
        well = SquareWell(5.0, radius)
        e_mev = 2.0
        k = math.sqrt(e_mev / params.kinetic_prefactor)
        big_k = math.sqrt((e_mev + well.depth_mev) / params.kinetic_prefactor)
        exact = wrap_half_pi(
            math.atan(k / big_k * math.tan(big_k * radius)) - k * radius
        )
        delta = phase_shift(well, params, e_mev, 0, r_match_fm=10.0, dr_fm=dr)
        npt.assert_allclose(delta, exact, rtol=0.0, atol=1e-8)

    @pytest.mark.parametrize("j", [0, 2])
    def test_bare_coulomb_gives_zero_relative_phase(self, j):
        ghost = SurrogatePotential(
            v0_mev=1e-30, radius_fm=7.09, diffuseness_fm=0.2, coulomb_radius_fm=3.4
        )
        delta = phase_shift(ghost, SystemParams(), 4.0, j, r_match_fm=25.0)
        npt.assert_allclose(delta, 0.0, atol=5e-9)

    def test_result_is_on_principal_branch(self, surrogate, params):
        delta = phase_shift(surrogate, params, 5.0, 2, r_match_fm=25.0)
        assert -0.5 * math.pi < delta <= 0.5 * math.pi

    def test_match_radius_inside_nuclear_range_rejected(self, surrogate, params):
        with pytest.raises(ValidationError, match="move r_match"):
            phase_shift(surrogate, params, 4.0, 0, r_match_fm=8.0)

    def test_match_radius_below_minimum_steps_rejected(self, surrogate, params):
        with pytest.raises(ValidationError):
            phase_shift(surrogate, params, 4.0, 0, r_match_fm=0.03)


class TestComputePhaseCurve:
    def test_refines_through_narrow_resonance(self, surrogate, params):
        # initial comb spaced one width apart, with a pair straddling the
        # resonance symmetrically: that pair's wrapped jump exceeds the
        # refinement threshold, so at least one midpoint must be inserted
        e_r, gamma = 3.98420779, 1.769281e-3
        curve = compute_phase_curve(
            surrogate,
            params,
            0,
            e_r - 10.5 * gamma,
            e_r + 10.5 * gamma,
            n_init=22,
            r_match_fm=25.0,
        )
        assert curve.energies_mev.size > 22
        jumps = np.abs(np.diff(curve.delta))
        assert jumps.max() < 0.45 * math.pi
        assert curve.delta[-1] - curve.delta[0] > 2.5  # the pi rise survived
        assert np.all(np.diff(curve.energies_mev) > 0)
        assert np.all(curve.eta > 0)
        assert np.all((curve.delta_raw > -0.5 * math.pi) & (curve.delta_raw <= 0.5 * math.pi))

    def test_evaluator_reproduces_stored_samples(self, surrogate, params):
        curve = compute_phase_curve(
            surrogate, params, 0, 4.4, 4.5, n_init=4, r_match_fm=25.0
        )
        mid = curve.energies_mev.size // 2
        npt.assert_allclose(
            curve.evaluator(float(curve.energies_mev[mid])),
            curve.delta_raw[mid],
            rtol=1e-12,
        )

    def test_rejects_bad_energy_range(self, surrogate, params):
        with pytest.raises(ValidationError, match="bad energy range"):
            compute_phase_curve(surrogate, params, 0, 5.0, 4.0)


class TestResonanceFromPhase:
    def test_inverts_synthetic_breit_wigner(self):
        fn = breit_wigner_phase(4.0, 0.003)
        resonance = resonance_from_phase(make_curve(fn, 3.97, 4.03, 101))
        npt.assert_allclose(resonance.e_r_mev, 4.0, rtol=0.0, atol=1e-9)
        npt.assert_allclose(resonance.gamma_kev, 3.0, rtol=1e-8)
        assert resonance.method == "phase-shift"
        assert resonance.e_r_err_mev == 0.0
        assert resonance.gamma_err_kev == 0.0

    def test_records_analysis_box_size(self):
        fn = breit_wigner_phase(4.0, 0.003)
        resonance = resonance_from_phase(make_curve(fn, 3.97, 4.03, 101), r_max_fm=3000.0)
        assert resonance.r_max_fm == 3000.0

    def test_surrogate_narrow_state_matches_frozen_values(self, surrogate, params):
        curve = compute_phase_curve(
            surrogate, params, 0, 3.96, 4.01, n_init=25, r_match_fm=25.0
        )
        resonance = resonance_from_phase(curve)
        npt.assert_allclose(resonance.e_r_mev, 3.98420779, atol=1e-6)
        npt.assert_allclose(resonance.gamma_kev, 1.76928, rtol=1e-3)
        assert resonance.j == 0

    def test_downward_crossing_is_an_antiresonance(self):
        fn = lambda e: wrap_half_pi(1.8 - 0.5 * (e - 4.0))
        with pytest.raises(AntiResonanceError, match="downward only"):
            resonance_from_phase(make_curve(fn, 3.0, 5.0, 41))

    def test_no_crossing_in_range(self):
        with pytest.raises(NotFoundError, match="no pi/2"):
            resonance_from_phase(make_curve(lambda e: 0.3, 3.0, 5.0, 41))

    def test_jittery_phase_fails_loudly_instead_of_guessing(self):
        smooth = breit_wigner_phase(4.0, 0.003)
        jitter = lambda e: wrap_half_pi(smooth(e) + 0.005 * math.sin(1e7 * e))
        energies = np.linspace(3.97, 4.03, 101)
        raw = np.array([smooth(e) for e in energies])
        curve = PhaseShiftCurve(
            j=0,
            energies_mev=energies,
            delta_raw=raw,
            delta=np.unwrap(raw, period=math.pi),
            eta=np.zeros(101),
            evaluator=jitter,
        )
        with pytest.raises(NumericalError, match="did not stabilize"):
            resonance_from_phase(curve)


class TestSMatrix:
    def test_unitary_phase_exponential(self):
        npt.assert_allclose(s_matrix(0.37), complex(math.cos(0.74), math.sin(0.74)), rtol=1e-15)
        npt.assert_allclose(abs(s_matrix(-1.2)), 1.0, rtol=1e-15)

    def test_sample_rejects_non_unimodular_value(self):
        with pytest.raises(ValidationError, match="not unimodular"):
            SMatrixSample(energy_mev=4.0, s_value=1.5 + 0.0j)

    def test_sampling_uses_curve_evaluator(self):
        fn = breit_wigner_phase(4.0, 0.01)
        curve = make_curve(fn, 3.9, 4.1, 21)
        samples = sample_s_matrix(curve, [3.95, 4.0, 4.05])
        assert [s.energy_mev for s in samples] == [3.95, 4.0, 4.05]
        for s in samples:
            npt.assert_allclose(s.s_value, s_matrix(fn(s.energy_mev)), rtol=1e-14)


def breit_wigner_s(e, e_r, gamma):
    return (e - e_r - 1j * gamma / 2.0) / (e - e_r + 1j * gamma / 2.0)


class TestFindPole:
    def test_recovers_single_pole_exactly(self):
        energies = np.linspace(3.95, 4.05, 24)
        samples = [
            SMatrixSample(float(e), complex(breit_wigner_s(e, 4.0, 0.012)))
            for e in energies
        ]
        resonance = find_pole(samples, orders=(2, 2), j=4)
        npt.assert_allclose(resonance.e_r_mev, 4.0, rtol=0.0, atol=1e-9)
        npt.assert_allclose(resonance.gamma_kev, 12.0, rtol=1e-9)
        assert resonance.method == "pole"
        assert resonance.j == 4

    def test_tolerates_smooth_background_phase(self):
        energies = np.linspace(3.95, 4.05, 24)
        samples = [
            SMatrixSample(
                float(e),
                complex(
                    np.exp(2j * 0.05 * (e - 4.0)) * breit_wigner_s(e, 4.0, 0.012)
                ),
            )
            for e in energies
        ]
        resonance = find_pole(samples, orders=(2, 2))
        npt.assert_allclose(resonance.e_r_mev, 4.0, atol=1e-6)
        npt.assert_allclose(resonance.gamma_kev, 12.0, rtol=1e-6)

    def test_three_overlapping_poles_trip_the_stability_check(self):
        # a (2,2) rational cannot hold three poles; the (3,3) refit can,
        # so the two candidates disagree and the fit must refuse to choose
        energies = np.linspace(3.85, 4.15, 40)
        s_values = (
            breit_wigner_s(energies, 3.95, 0.02)
            * breit_wigner_s(energies, 4.00, 0.02)
            * breit_wigner_s(energies, 4.05, 0.02)
        )
        samples = [SMatrixSample(float(e), complex(s)) for e, s in zip(energies, s_values)]
        with pytest.raises(PoleInstabilityError) as excinfo:
            find_pole(samples, orders=(2, 2), j=0)
        low, high = excinfo.value.candidates
        npt.assert_allclose(high.e_r_mev, 4.0, atol=1e-6)
        npt.assert_allclose(high.gamma_kev, 20.0, rtol=1e-6)
        assert abs(low.gamma_kev - high.gamma_kev) > 0.2 * high.gamma_kev

    def test_constant_background_has_no_pole(self):
        samples = [
            SMatrixSample(float(e), complex(np.exp(2j * 0.2)))
            for e in np.linspace(3.0, 4.0, 12)
        ]
        with pytest.raises(NotFoundError):
            find_pole(samples, orders=(2, 2))

    def test_needs_enough_samples_for_the_orders(self):
        energies = np.linspace(3.95, 4.05, 7)
        samples = [
            SMatrixSample(float(e), complex(breit_wigner_s(e, 4.0, 0.012)))
            for e in energies
        ]
        with pytest.raises(ValidationError):
            find_pole(samples, orders=(2, 2))


class TestPhaseCurveIO:
    def test_roundtrip_is_bit_exact(self, tmp_path, surrogate, params):
        curve = compute_phase_curve(
            surrogate, params, 2, 4.5, 4.7, n_init=6, r_match_fm=25.0
        )
        path = tmp_path / "phase.csv"
        save_phase_curve(path, curve, extra_metadata={"r_match_fm": 25.0})
        meta, table = load_phase_curve(path)
        assert meta["j"] == "2"
        assert meta["r_match_fm"] == "25.0"
        assert int(meta["n_samples"]) == curve.energies_mev.size
        assert np.array_equal(table[:, 0], curve.energies_mev)
        assert np.array_equal(table[:, 1], curve.delta_raw)
        assert np.array_equal(table[:, 2], curve.delta)
        assert np.array_equal(table[:, 3], curve.eta)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# j = 0\nE_MeV,delta_rad,delta_unwrapped_rad,eta\n")
        with pytest.raises(ValidationError):
            load_phase_curve(path)

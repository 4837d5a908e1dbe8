"""Potential models, kinematic constants, and barrier geometry."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from resoscan import constants
from resoscan.errors import NoBarrierError, ValidationError
from resoscan.potential import (
    BarrierInfo,
    SurrogatePotential,
    SystemParams,
    TabulatedPotential,
    centrifugal_term,
    default_surrogate,
    find_barrier,
    load_tabulated,
    save_potential_table,
    total_potential,
)


class TestSystemParams:
    def test_kinetic_prefactor_formula(self, params):
        expected = constants.HBARC**2 / (2.0 * constants.C12_C12_REDUCED_MASS_MEV)
        assert_allclose(params.kinetic_prefactor, expected, rtol=1e-15)
        assert_allclose(params.kinetic_prefactor, 3.4834671442685976, rtol=1e-15)

    def test_wavenumber_at_six_mev(self, params):
        # sqrt(2 * 5588.964 * 6) / 197.327 = 1.3124 1/fm
        assert_allclose(params.wavenumber(6.0), 1.3124, atol=5e-5)
        expected = np.sqrt(2.0 * params.reduced_mass_mev * 6.0) / params.hbar_c
        assert_allclose(params.wavenumber(6.0), expected, rtol=1e-15)

    def test_wavenumber_needs_positive_energy(self, params):
        with pytest.raises(ValidationError):
            params.wavenumber(0.0)
        with pytest.raises(ValidationError):
            params.wavenumber(-1.0)

    def test_sommerfeld_parameter(self, params):
        k = params.wavenumber(6.0)
        expected = 36.0 * constants.E2 * params.reduced_mass_mev / (params.hbar_c**2 * k)
        assert_allclose(params.sommerfeld(6.0), expected, rtol=1e-15)
        assert_allclose(params.sommerfeld(6.0), 5.669496150842896, rtol=1e-12)

    def test_rejects_nonpositive_inputs(self):
        with pytest.raises(ValidationError):
            SystemParams(reduced_mass_mev=-1.0)
        with pytest.raises(ValidationError):
            SystemParams(charge_product=-0.5)
        with pytest.raises(ValidationError):
            SystemParams(hbar_c=0.0)


class TestCentrifugal:
    def test_quoted_value_j2_at_ten_fm(self):
        # 3.483 MeV fm^2 scaling: J=2 at R=10 fm with mu c^2 = 5589.49 MeV
        p = SystemParams(reduced_mass_mev=5589.49)
        assert_allclose(float(centrifugal_term(p, 2, 10.0)), 0.2090, atol=5e-5)
        assert_allclose(float(centrifugal_term(p, 2, 10.0)), 0.2089883599165577, rtol=1e-14)

    def test_s_wave_vanishes(self, params):
        r = np.array([0.5, 3.0, 12.0])
        assert np.all(centrifugal_term(params, 0, r) == 0.0)

    def test_scaling_in_j_and_radius(self, params):
        base = float(centrifugal_term(params, 1, 4.0))
        assert_allclose(float(centrifugal_term(params, 2, 4.0)), base * 3.0, rtol=1e-14)
        assert_allclose(float(centrifugal_term(params, 1, 8.0)), base / 4.0, rtol=1e-14)


class TestSurrogatePotential:
    def test_default_parameters_are_frozen(self, surrogate):
        assert surrogate.v0_mev == 6.77
        assert surrogate.radius_fm == 7.09
        assert surrogate.diffuseness_fm == 0.20
        assert surrogate.coulomb_radius_fm == 3.40

    def test_pure_coulomb_tail_far_outside(self, params, surrogate):
        # nuclear part is ~exp(-65) at 20 fm, so the bare value is the point tail
        zz_e2 = params.charge_product * constants.E2
        for r in (20.0, 25.0, 40.0):
            assert_allclose(float(surrogate.bare(r, params)), zz_e2 / r, rtol=1e-12)

    def test_uniform_sphere_interior(self, params, surrogate):
        rc = surrogate.coulomb_radius_fm
        r = 1.0
        nuclear = -surrogate.v0_mev / (1.0 + np.exp((r - surrogate.radius_fm) / 0.20))
        coulomb = params.charge_product * constants.E2 * (3.0 - (r / rc) ** 2) / (2.0 * rc)
        assert_allclose(float(surrogate.bare(r, params)), nuclear + coulomb, rtol=1e-12)

    def test_coulomb_continuous_at_sphere_edge(self, params, surrogate):
        rc = surrogate.coulomb_radius_fm
        below = float(surrogate.bare(rc * (1.0 - 1e-9), params))
        above = float(surrogate.bare(rc * (1.0 + 1e-9), params))
        assert abs(below - above) < 1e-6

    def test_no_overflow_far_outside_the_well(self, params, surrogate):
        with np.errstate(over="raise"):
            vals = surrogate.bare(np.array([1.0, 7.09, 500.0, 5000.0]), params)
        assert np.all(np.isfinite(vals))

    def test_rejects_nonpositive_shape_parameters(self):
        with pytest.raises(ValidationError):
            SurrogatePotential(v0_mev=0.0, radius_fm=7.0, diffuseness_fm=0.2, coulomb_radius_fm=3.4)
        with pytest.raises(ValidationError):
            SurrogatePotential(v0_mev=6.0, radius_fm=7.0, diffuseness_fm=0.0, coulomb_radius_fm=3.4)


class TestTotalPotential:
    def test_s_wave_equals_bare(self, params, surrogate):
        r = np.linspace(0.5, 30.0, 97)
        v0 = total_potential(surrogate, params, 0)(r)
        assert_allclose(v0, surrogate.bare(r, params), rtol=0, atol=0)

    def test_adds_centrifugal_for_higher_waves(self, params, surrogate):
        r = np.linspace(0.5, 30.0, 97)
        v4 = total_potential(surrogate, params, 4)(r)
        expected = surrogate.bare(r, params) + centrifugal_term(params, 4, r)
        assert_allclose(v4, expected, rtol=1e-15)

    def test_rejects_bad_partial_wave(self, params, surrogate):
        with pytest.raises(ValidationError):
            total_potential(surrogate, params, -1)
        with pytest.raises(ValidationError):
            total_potential(surrogate, params, 1.5)


class TestFindBarrier:
    # geometry of the frozen default surrogate, reproducible via
    # tools/calibrate_surrogate.py
    CASES = {
        0: (6.457534253017944, 7.8166541635408855, 1.5321317659269402, 6.445564488090708),
        2: (6.800572107661235, 7.794861103137742, 2.0333247912438126, 6.469517379344836),
        4: (7.608023471262406, 7.74962501839264, 3.189779259916322, 6.516755737408353),
    }

    @pytest.mark.parametrize("j", [0, 2, 4])
    def test_frozen_barrier_geometry(self, params, surrogate, j):
        height, radius, pocket, pocket_r = self.CASES[j]
        info = find_barrier(surrogate, params, j)
        assert info.j == j
        assert_allclose(info.height_mev, height, rtol=1e-9)
        assert_allclose(info.radius_fm, radius, atol=2e-3)
        assert_allclose(info.pocket_depth_mev, pocket, rtol=1e-6)
        assert_allclose(info.pocket_radius_fm, pocket_r, atol=2e-3)

    def test_default_calibration_target(self, params, surrogate):
        info = find_barrier(surrogate, params, 0)
        assert abs(info.height_mev - 6.5) < 0.1
        assert abs(info.radius_fm - 8.0) < 0.2

    def test_geometry_invariants(self, params, surrogate):
        for j in (0, 2, 4):
            info = find_barrier(surrogate, params, j)
            assert 0.0 < info.pocket_radius_fm < info.radius_fm
            assert info.pocket_depth_mev < info.height_mev

    def test_barrier_rises_with_partial_wave(self, params, surrogate):
        heights = [find_barrier(surrogate, params, j).height_mev for j in (0, 2, 4)]
        assert heights[0] < heights[1] < heights[2]

    def test_pure_coulomb_has_no_pocket(self, params):
        radii = np.linspace(0.4, 30.0, 200)
        table = TabulatedPotential(radii, 36.0 * constants.E2 / radii)
        with pytest.raises(NoBarrierError):
            find_barrier(table, params, 0)


class TestTabulatedPotential:
    def test_matches_surrogate_between_nodes(self, params, surrogate):
        nodes = np.arange(0.5, 30.0 + 1e-9, 0.05)
        table = TabulatedPotential(nodes, surrogate.bare(nodes, params))
        mids = nodes[:-1] + 0.025
        assert_allclose(table.bare(mids, params), surrogate.bare(mids, params), atol=1e-3)

    def test_tail_continues_as_one_over_r(self, params):
        radii = np.array([1.0, 2.0, 3.0, 4.0])
        vals = np.array([5.0, 4.0, 3.0, 2.0])
        table = TabulatedPotential(radii, vals)
        # matched tail: U(R) = U_last * R_last / R beyond the table
        assert_allclose(float(table.bare(8.0, params)), 2.0 * 4.0 / 8.0, rtol=1e-15)
        assert_allclose(float(table.bare(40.0, params)), 2.0 * 4.0 / 40.0, rtol=1e-15)

    def test_below_first_node_is_undefined(self, params):
        table = TabulatedPotential(np.array([1.0, 2.0, 3.0, 4.0]), np.ones(4))
        with pytest.raises(ValidationError):
            table.bare(0.5, params)

    def test_needs_at_least_four_rows(self):
        with pytest.raises(ValidationError):
            TabulatedPotential(np.array([1.0, 2.0, 3.0]), np.zeros(3))

    def test_rejects_unsorted_or_nonpositive_radii(self):
        with pytest.raises(ValidationError):
            TabulatedPotential(np.array([1.0, 3.0, 2.0, 4.0]), np.zeros(4))
        with pytest.raises(ValidationError):
            TabulatedPotential(np.array([0.0, 1.0, 2.0, 3.0]), np.zeros(4))


class TestTableIO:
    def test_load_skips_comments_and_blank_lines(self, tmp_path, params):
        path = tmp_path / "pot.dat"
        path.write_text(
            "# header comment\n"
            "\n"
            "1.0 -3.5\n"
            "2.0 -2.5  # inline comment\n"
            "3.0 -1.5\n"
            "4.0 -0.5\n"
        )
        table = load_tabulated(path)
        assert_allclose(table.radii, [1.0, 2.0, 3.0, 4.0])
        assert_allclose(table.values, [-3.5, -2.5, -1.5, -0.5])
        assert_allclose(float(table.bare(2.0, params)), -2.5, rtol=1e-15)

    def test_two_row_file_is_rejected(self, tmp_path):
        path = tmp_path / "short.dat"
        path.write_text("1.0 -3.5\n2.0 -2.5\n")
        with pytest.raises(ValidationError):
            load_tabulated(path)

    def test_wrong_column_count_names_the_line(self, tmp_path):
        path = tmp_path / "bad.dat"
        path.write_text("1.0 -3.5\n2.0 -2.5 0.0\n3.0 -1.5\n4.0 -0.5\n")
        with pytest.raises(ValidationError, match=r":2:"):
            load_tabulated(path)

    def test_non_numeric_entry_names_the_line(self, tmp_path):
        path = tmp_path / "bad.dat"
        path.write_text("1.0 -3.5\n2.0 -2.5\nthree -1.5\n4.0 -0.5\n")
        with pytest.raises(ValidationError, match="non-numeric"):
            load_tabulated(path)

    def test_missing_file_is_a_validation_error(self, tmp_path):
        with pytest.raises(ValidationError):
            load_tabulated(tmp_path / "nope.dat")

    def test_save_then_load_roundtrip(self, tmp_path, params, surrogate):
        path = tmp_path / "effective.dat"
        radii = np.linspace(0.5, 30.0, 120)
        save_potential_table(path, surrogate, params, 2, radii)
        text = path.read_text()
        assert "# R_fm U_MeV" in text
        table = load_tabulated(path)
        expected = total_potential(surrogate, params, 2)(radii)
        assert_allclose(table.values, expected, rtol=2e-9, atol=1e-12)
        assert_allclose(table.radii, radii, atol=5e-7)

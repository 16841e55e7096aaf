"""Geometry, steering, and dictionary unit tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thzest.arrays import (
    SPEED_OF_LIGHT,
    ArrayConfig,
    Direction,
    SubcarrierGrid,
    array_gain,
    beam_split_far,
    beam_split_near,
    build_dictionary,
    dirichlet,
    fraunhofer_distance,
    near_field_spatial_direction,
    spatial_direction,
    steering_far,
    steering_near,
    ula_fraunhofer_distance,
)

CFG = ArrayConfig.half_wavelength(32, 300e9)


class TestArrayConfig:
    def test_half_wavelength_spacing(self):
        assert CFG.element_spacing_m == pytest.approx(
            SPEED_OF_LIGHT / 600e9, rel=1e-12)

    def test_aperture(self):
        assert CFG.aperture_m == pytest.approx(31 * CFG.element_spacing_m)

    @pytest.mark.parametrize("kwargs", [
        {"n_antennas": 1, "carrier_freq_hz": 1e9, "element_spacing_m": 0.1},
        {"n_antennas": 4, "carrier_freq_hz": -1.0, "element_spacing_m": 0.1},
        {"n_antennas": 4, "carrier_freq_hz": 1e9, "element_spacing_m": 0.0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            ArrayConfig(**kwargs)


class TestSubcarrierGrid:
    def test_frequencies_symmetric_around_carrier(self):
        grid = SubcarrierGrid.build(8, 30e9, 300e9)
        # f_m = f_c + (B/M) (m - 1 - (M-1)/2), 1-based m
        expected = 300e9 + (30e9 / 8) * (np.arange(1, 9) - 1 - 3.5)
        np.testing.assert_allclose(grid.frequencies, expected)
        assert np.mean(grid.frequencies) == pytest.approx(300e9)

    def test_center_index(self):
        assert SubcarrierGrid.build(8, 30e9, 300e9).center_index in (3, 4)
        assert SubcarrierGrid.build(9, 30e9, 300e9).center_index == 4

    def test_single_subcarrier_sits_on_carrier(self):
        grid = SubcarrierGrid.build(1, 0.0, 300e9)
        assert grid.frequencies[0] == pytest.approx(300e9)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SubcarrierGrid.build(0, 30e9, 300e9)


class TestDirection:
    def test_round_trip(self):
        d = Direction.from_sine(0.37)
        assert np.sin(d.angle_rad) == pytest.approx(0.37)

    def test_bounds(self):
        with pytest.raises(ValueError):
            Direction.from_sine(1.01)
        with pytest.raises(ValueError):
            Direction.from_angle(2.0)


class TestSteeringFar:
    def test_entry_formula(self):
        # Half-wavelength spacing at the carrier: entry i is
        # exp(j pi (i-1) (f/f_c) sine) / sqrt(N).
        sine, f = 0.42, 315e9
        a = steering_far(CFG, sine, f)
        idx = np.arange(32)
        expected = np.exp(1j * np.pi * idx * (f / 300e9) * sine) / np.sqrt(32)
        np.testing.assert_allclose(a, expected, atol=1e-14)

    @settings(deadline=None, max_examples=50)
    @given(sine=st.floats(-1.0, 1.0), f_rel=st.floats(0.9, 1.1))
    def test_unit_norm(self, sine, f_rel):
        a = steering_far(CFG, sine, f_rel * 300e9)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            steering_far(CFG, 1.2, 300e9)
        with pytest.raises(ValueError):
            steering_far(CFG, 0.2, -1.0)


class TestSplitMaps:
    @settings(deadline=None, max_examples=50)
    @given(sine=st.floats(-1.0, 1.0), f_rel=st.floats(0.9, 1.1))
    def test_split_is_spatial_minus_physical(self, sine, f_rel):
        f = f_rel * 300e9
        assert beam_split_far(sine, f, 300e9) == pytest.approx(
            spatial_direction(sine, f, 300e9) - sine, abs=1e-15)

    def test_no_split_at_carrier(self):
        assert beam_split_far(0.7, 300e9, 300e9) == 0.0

    def test_near_split_reduces_to_far_at_infinity(self):
        far = beam_split_far(0.5, 310e9, 300e9)
        near = beam_split_near(0.5, np.arcsin(0.5), 1e12, 310e9, 300e9, 16)
        assert near == pytest.approx(far, abs=1e-12)

    def test_near_spatial_direction_range_term_sign(self):
        # The range correction pulls the spatial direction down for
        # elements beyond the reference one.
        base = near_field_spatial_direction(0.5, np.arcsin(0.5), 5.0,
                                            310e9, 300e9, 1)
        shifted = near_field_spatial_direction(0.5, np.arcsin(0.5), 5.0,
                                               310e9, 300e9, 9)
        assert shifted < base


class TestDirichlet:
    def test_matches_ratio_away_from_integers(self):
        for a in (0.013, 0.31, -0.77, 1.43):
            expected = np.sin(16 * np.pi * a) / (16 * np.sin(np.pi * a))
            assert dirichlet(a, 16) == pytest.approx(expected, rel=1e-12)

    def test_integer_limits(self):
        assert dirichlet(0.0, 16) == 1.0
        assert dirichlet(1.0, 16) == (-1.0) ** 15
        assert dirichlet(2.0, 16) == 1.0
        # Continuity across the singularity.
        assert dirichlet(1e-9, 16) == pytest.approx(dirichlet(0.0, 16), abs=1e-6)

    @settings(deadline=None, max_examples=100)
    @given(a=st.floats(-3.0, 3.0), n=st.integers(2, 64))
    def test_magnitude_bounded_by_one(self, a, n):
        assert abs(dirichlet(a, n)) <= 1.0 + 1e-12


class TestArrayGain:
    def test_unity_when_beam_matches_source(self):
        # The kernel argument vanishes when f_c * spatial = f * physical.
        f = 310e9
        phys = 0.6
        spatial = f * phys / 300e9
        assert array_gain(CFG, phys, spatial, f) == pytest.approx(1.0)

    def test_loss_under_mismatch(self):
        f = 330e9
        # Beam steered to the physical direction instead of the shifted one.
        assert array_gain(CFG, 0.6, 0.6, f) < 0.9


class TestSteeringNear:
    def test_exact_matches_element_distances(self):
        # Independent oracle: place the source in the plane and measure
        # per-element Euclidean distances directly.
        r, sine = 3.0, 0.35
        angle = np.arcsin(sine)
        src = np.array([r * np.cos(angle), r * np.sin(angle)])
        pos = np.stack([np.zeros(32),
                        np.arange(32) * CFG.element_spacing_m], axis=1)
        dists = np.linalg.norm(src[np.newaxis, :] - pos, axis=1)
        phase = -2 * np.pi * (310e9 / SPEED_OF_LIGHT) * (dists - r)
        expected = np.exp(1j * phase) / np.sqrt(32)
        a = steering_near(CFG, sine, r, 310e9, mode="exact")
        np.testing.assert_allclose(a, expected, atol=1e-12)

    def test_taylor_close_to_exact_at_moderate_range(self):
        exact = steering_near(CFG, 0.3, 20.0, 300e9, mode="exact")
        taylor = steering_near(CFG, 0.3, 20.0, 300e9, mode="taylor")
        assert np.max(np.abs(exact - taylor)) < 1e-3

    def test_far_field_limit(self):
        near = steering_near(CFG, 0.3, 1e9, 310e9, mode="exact")
        far = steering_far(CFG, 0.3, 310e9)
        assert np.max(np.abs(near - far)) < 1e-3

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            steering_near(CFG, 0.3, -1.0, 300e9)
        with pytest.raises(ValueError):
            steering_near(CFG, 0.3, 1.0, 300e9, mode="cubic")


class TestFraunhofer:
    def test_formula(self):
        assert fraunhofer_distance(0.1, 300e9) == pytest.approx(
            2 * 0.01 * 300e9 / SPEED_OF_LIGHT)

    def test_ula_uses_physical_aperture(self):
        assert ula_fraunhofer_distance(CFG) == pytest.approx(
            fraunhofer_distance(CFG.aperture_m, 300e9))

    def test_rejects_nonpositive_aperture(self):
        with pytest.raises(ValueError):
            fraunhofer_distance(0.0, 300e9)


class TestDictionary:
    def test_grid_points(self):
        d = build_dictionary(CFG, 64)
        # Equispaced grid (2n - N - 1)/N covering (-1, 1).
        np.testing.assert_allclose(
            d.grid_points, (2 * np.arange(1, 65) - 65) / 64)

    def test_atoms_are_carrier_steering_vectors(self):
        d = build_dictionary(CFG, 64)
        for n in (0, 17, 63):
            np.testing.assert_allclose(
                d.atoms[:, n],
                steering_far(CFG, float(d.grid_points[n]), 300e9),
                atol=1e-14)

    def test_rejects_undercomplete_grid(self):
        with pytest.raises(ValueError):
            build_dictionary(CFG, 16)

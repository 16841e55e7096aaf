"""Channel synthesis and pilot observation tests."""

import numpy as np
import pytest

from thzest.arrays import ArrayConfig, Direction, SubcarrierGrid, steering_far
from thzest.channel import (
    DELAY_SPREAD_S,
    NLOS_GAIN_DB,
    PathParams,
    channel_from_paths,
    gen_channel,
    gen_pilot_matrix,
    observe,
    path_steering,
)

CFG = ArrayConfig.half_wavelength(16, 300e9)
GRID = SubcarrierGrid.build(4, 30e9, 300e9)


def _los(sine=0.3, delay=0.0, gain=1.0 + 0j):
    return PathParams(gain=gain, delay_s=delay,
                      direction=Direction.from_sine(sine),
                      range_m=None, is_los=True)


class TestChannelFromPaths:
    def test_single_path_zero_delay(self):
        h = channel_from_paths(CFG, GRID, [_los()])
        for m, f in enumerate(GRID.frequencies):
            expected = np.sqrt(16) * steering_far(CFG, 0.3, float(f))
            np.testing.assert_allclose(h[:, m], expected, atol=1e-12)

    def test_delay_phase(self):
        tau = 5e-9
        h0 = channel_from_paths(CFG, GRID, [_los(delay=0.0)])
        h1 = channel_from_paths(CFG, GRID, [_los(delay=tau)])
        for m, f in enumerate(GRID.frequencies):
            rot = np.exp(-2j * np.pi * tau * float(f))
            np.testing.assert_allclose(h1[:, m], rot * h0[:, m], atol=1e-12)

    def test_path_count_normalization(self):
        # sqrt(N/L) scaling: two identical paths give sqrt(2) the energy
        # of one, not 2x.
        one = channel_from_paths(CFG, GRID, [_los()])
        two = channel_from_paths(CFG, GRID, [_los(), _los()])
        assert np.linalg.norm(two) == pytest.approx(
            np.sqrt(2) * np.linalg.norm(one), rel=1e-12)

    def test_near_path_requires_range(self):
        with pytest.raises(ValueError):
            path_steering(CFG, _los(), 300e9, "near")
        with pytest.raises(ValueError):
            path_steering(CFG, _los(), 300e9, "underwater")


class TestGenChannel:
    def test_reproducible(self):
        a = gen_channel(CFG, GRID, 3, rng_seed=7)
        b = gen_channel(CFG, GRID, 3, rng_seed=7)
        np.testing.assert_array_equal(a.per_subcarrier, b.per_subcarrier)
        assert a.paths == b.paths

    def test_los_first_and_gain_profile(self):
        ch = gen_channel(CFG, GRID, 4, rng_seed=3)
        assert ch.los_path.is_los
        assert abs(ch.los_path.gain) == pytest.approx(1.0)
        for p in ch.paths[1:]:
            assert not p.is_los
            assert abs(p.gain) == pytest.approx(10 ** (NLOS_GAIN_DB / 20))

    def test_delays_within_spread(self):
        ch = gen_channel(CFG, GRID, 5, rng_seed=11)
        for p in ch.paths:
            assert 0.0 <= p.delay_s <= DELAY_SPREAD_S

    def test_near_scenario_ranges(self):
        ch = gen_channel(CFG, GRID, 2, scenario="near", rng_seed=5)
        for p in ch.paths:
            assert 1.0 <= p.range_m <= 30.0
        fixed = gen_channel(CFG, GRID, 2, scenario="near", rng_seed=5,
                            range_m=4.5)
        assert all(p.range_m == 4.5 for p in fixed.paths)

    def test_rejects_zero_paths(self):
        with pytest.raises(ValueError):
            gen_channel(CFG, GRID, 0)


class TestPilotsAndObservation:
    def test_pilot_entries_constant_modulus(self):
        b = gen_pilot_matrix(CFG, 8, rng_seed=1)
        assert b.shape == (8, 16)
        np.testing.assert_allclose(np.abs(b), 1 / np.sqrt(16), atol=1e-14)

    def test_observation_shapes_and_model(self):
        ch = gen_channel(CFG, GRID, 1, rng_seed=2)
        b = gen_pilot_matrix(CFG, 8, rng_seed=3)
        obs = observe(ch, b, snr_db=200.0, rng_seed=4)
        assert obs.received.shape == (8, 4)
        # At 200 dB the observation is numerically the clean product.
        np.testing.assert_allclose(obs.received, b @ ch.per_subcarrier,
                                   rtol=1e-7)

    def test_noise_calibration(self):
        # Definition: mean_m ||B h[m]||^2 / (P mu^2) = 10^(snr/10).
        ch = gen_channel(CFG, GRID, 1, rng_seed=2)
        b = gen_pilot_matrix(CFG, 8, rng_seed=3)
        obs = observe(ch, b, snr_db=17.0, rng_seed=4)
        clean = b @ ch.per_subcarrier
        sig = np.mean(np.sum(np.abs(clean) ** 2, axis=0))
        assert sig / (8 * obs.noise_var) == pytest.approx(10 ** 1.7, rel=1e-12)

    def test_noise_statistics(self):
        ch = gen_channel(CFG, GRID, 1, rng_seed=2)
        b = gen_pilot_matrix(CFG, 256, rng_seed=3)
        obs = observe(ch, b, snr_db=0.0, rng_seed=4)
        noise = obs.received - b @ ch.per_subcarrier
        emp = np.mean(np.abs(noise) ** 2)
        assert emp == pytest.approx(obs.noise_var, rel=0.15)

    def test_dimension_check(self):
        ch = gen_channel(CFG, GRID, 1, rng_seed=2)
        with pytest.raises(ValueError):
            observe(ch, np.ones((4, 9)), 10.0)

    def test_generator_seed_records_sentinel(self):
        ch = gen_channel(CFG, GRID, 1, rng_seed=2)
        b = gen_pilot_matrix(CFG, 8, rng_seed=3)
        obs = observe(ch, b, 10.0, rng_seed=np.random.default_rng(0))
        assert obs.seed == -1

"""Geometry, path loss, and seeded channel generation."""

import math

import numpy as np
import pytest

from bibc.errors import ParameterError
from bibc.numerics import SeededRng
from bibc.scenario import (Scenario, SystemConfig, build_topology,
                           draw_channels, noise_power_watts, path_loss_linear,
                           place_tags)


class TestNoise:
    def test_reference_value(self):
        # -147 + 60 + 10 = -77 dBm
        watts = noise_power_watts(1e6, 10.0)
        assert watts == pytest.approx(1.995262314968879e-11, rel=1e-12)

    def test_scaling_with_bandwidth(self):
        assert noise_power_watts(2e6, 10.0) == pytest.approx(
            2 * noise_power_watts(1e6, 10.0), rel=1e-12)

    def test_invalid_bandwidth(self):
        with pytest.raises(ParameterError):
            noise_power_watts(0.0, 10.0)


class TestPathLoss:
    def test_reference_distance(self):
        config = SystemConfig()
        assert path_loss_linear(config, 1.0) == pytest.approx(1e-3, rel=1e-12)

    def test_square_law(self):
        config = SystemConfig()
        assert path_loss_linear(config, 10.0) == pytest.approx(1e-5, rel=1e-12)

    def test_invalid_distance(self):
        with pytest.raises(ParameterError):
            path_loss_linear(SystemConfig(), 0.0)


class TestPlacement:
    def test_within_radius(self):
        pos = place_tags(SeededRng(1), 500, (3.0, 8.0, 0.0), 2.0)
        d = np.linalg.norm(pos - np.array([3.0, 8.0, 0.0]), axis=1)
        assert d.max() <= 2.0 + 1e-12
        assert pos.shape == (500, 3)
        np.testing.assert_array_equal(pos[:, 2], 0.0)

    def test_area_uniform_radius(self):
        # uniform over the disc: mean radius = 2R/3
        pos = place_tags(SeededRng(2), 20000, (0.0, 0.0, 0.0), 3.0)
        d = np.linalg.norm(pos[:, :2], axis=1)
        assert np.mean(d) == pytest.approx(2.0, abs=0.03)


class TestTopology:
    def test_direct_distance(self):
        config = SystemConfig()
        topo = build_topology(config, SeededRng(0))
        assert topo.d_direct == pytest.approx(math.sqrt(73.0), rel=1e-12)
        assert topo.beta_direct == pytest.approx(1e-3 / 73.0, rel=1e-12)

    def test_forward_backward_ranges(self):
        config = SystemConfig()
        topo = build_topology(config, SeededRng(0))
        # tags live on a radius-2 disc around (3, 8, 0)
        assert np.all(topo.d_backward <= 2.0 + config.tag_radius_m + 3.1)
        assert np.all(topo.d_forward >= 8.0 - config.tag_radius_m - 1e-9)
        assert np.all(topo.d_forward <= 8.0 + config.tag_radius_m + 0.6)


class TestChannels:
    def test_rank_one_cascades(self):
        config = SystemConfig(m=3, n=4, k=2)
        topo = build_topology(config, SeededRng(5))
        ch = draw_channels(SeededRng(6), config, topo)
        assert ch.f0.shape == (3, 4)
        assert ch.g_f.shape == (2, 3)
        assert ch.g_b.shape == (2, 4)
        assert ch.f.shape == (2, 3, 4)
        for k in range(2):
            np.testing.assert_allclose(
                ch.f[k], np.outer(ch.g_f[k], ch.g_b[k].conj()), atol=1e-15)
            assert np.linalg.matrix_rank(ch.f[k]) == 1

    def test_large_scale_powers(self):
        config = SystemConfig(m=64, n=64, k=1)
        topo = build_topology(config, SeededRng(7))
        ch = draw_channels(SeededRng(8), config, topo)
        assert np.mean(np.abs(ch.f0) ** 2) == pytest.approx(
            topo.beta_direct, rel=0.1)
        assert np.mean(np.abs(ch.g_f[0]) ** 2) == pytest.approx(
            topo.beta_forward[0], rel=0.35)

    def test_scenario_deterministic(self):
        a = Scenario(SystemConfig(m=4, n=4, k=2), seed=9)
        b = Scenario(SystemConfig(m=4, n=4, k=2), seed=9)
        np.testing.assert_array_equal(a.topology.tag_pos, b.topology.tag_pos)
        np.testing.assert_array_equal(a.channels(3).f0, b.channels(3).f0)
        # repeated access to the same episode replays the same draw
        np.testing.assert_array_equal(a.channels(3).f0, a.channels(3).f0)

    def test_episodes_differ(self):
        s = Scenario(SystemConfig(m=4, n=4, k=2), seed=9)
        assert np.max(np.abs(s.channels(0).f0 - s.channels(1).f0)) > 1e-9

    def test_seeds_differ(self):
        a = Scenario(SystemConfig(m=4, n=4, k=2), seed=9)
        b = Scenario(SystemConfig(m=4, n=4, k=2), seed=10)
        assert np.max(np.abs(a.channels(0).f0 - b.channels(0).f0)) > 1e-9

    def test_negative_episode_rejected(self):
        s = Scenario(SystemConfig(m=4, n=4, k=2), seed=9)
        with pytest.raises(ParameterError):
            s.channels(-1)

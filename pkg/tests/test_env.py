"""Episodic environment: action maps, state layout, penalties, determinism."""

import math

import numpy as np
import pytest

from bibc.environment import BackscatterEnv, action_dim, state_dim
from bibc.errors import ActionError, ParameterError, StateError
from bibc.link import EhParams, eh_threshold
from bibc.scenario import SystemConfig


def desk_config(**kw):
    defaults = dict(m=4, n=4, k=2, eh=EhParams(threshold_mode="incident"))
    defaults.update(kw)
    return SystemConfig(**defaults)


class TestDimensions:
    @pytest.mark.parametrize("m,n,k,ds,da", [
        (12, 12, 2, 990, 26),
        (4, 4, 2, 142, 10),
        (10, 10, 1, 464, 21),
    ])
    def test_formulas(self, m, n, k, ds, da):
        config = SystemConfig(m=m, n=n, k=k)
        assert state_dim(config) == ds
        assert action_dim(config) == da

    def test_env_exposes_dims(self):
        env = BackscatterEnv(desk_config(), seed=0)
        assert env.state_dim == 142
        assert env.action_dim == 10


class TestActionMap:
    def test_bounds_hit_power_budget_exactly(self):
        env = BackscatterEnv(desk_config(), seed=0)
        raw = np.ones(env.action_dim)
        w, alpha = env.apply_action(raw)
        assert np.sum(np.abs(w) ** 2) == pytest.approx(10.0, rel=1e-12)
        np.testing.assert_allclose(alpha, 1 - 1e-3)

    def test_alpha_affine_endpoints_and_midpoint(self):
        env = BackscatterEnv(desk_config(), seed=0)
        raw = np.zeros(env.action_dim)
        raw[-2:] = [-1.0, 1.0]
        _, alpha = env.apply_action(raw)
        np.testing.assert_allclose(alpha, [1e-3, 1 - 1e-3])
        _, alpha = env.apply_action(np.zeros(env.action_dim))
        np.testing.assert_allclose(alpha, 0.5)

    def test_out_of_range_clipped(self):
        env = BackscatterEnv(desk_config(), seed=0)
        w_big, _ = env.apply_action(np.full(env.action_dim, 5.0))
        w_one, _ = env.apply_action(np.ones(env.action_dim))
        np.testing.assert_allclose(w_big, w_one)

    def test_shape_and_finite_validation(self):
        env = BackscatterEnv(desk_config(), seed=0)
        with pytest.raises(ActionError):
            env.apply_action(np.ones(3))
        bad = np.ones(env.action_dim)
        bad[0] = np.nan
        with pytest.raises(ActionError):
            env.apply_action(bad)

    def test_raw_from_physical_roundtrip(self):
        env = BackscatterEnv(desk_config(), seed=0)
        raw = np.linspace(-0.9, 0.9, env.action_dim)
        w, alpha = env.apply_action(raw)
        np.testing.assert_allclose(env.raw_from_physical(w, alpha), raw,
                                   atol=1e-12)


class TestStateLayout:
    def test_reset_embeds_default_action(self):
        env = BackscatterEnv(desk_config(), seed=3)
        s = env.reset()
        m, k, da = 4, 2, env.action_dim
        np.testing.assert_allclose(s[:2 * m], 1 / math.sqrt(2))
        np.testing.assert_allclose(s[2 * m:da], 0.0)
        assert s[da] == 0.0  # reward slot
        # transmit power slot: P_s / 2 = 5 W -> about 37 dBm, normalized by 30
        expected = 10 * math.log10(5.0 * 1000) / 30
        assert s[da + 1] == pytest.approx(expected, rel=1e-12)
        assert s.shape == (env.state_dim,)

    def test_channel_block_normalization_is_unit_scale(self):
        # normalized channel entries should be O(1) despite -80 dB path loss
        env = BackscatterEnv(desk_config(), seed=3)
        s = env.reset()
        da, k = env.action_dim, 2
        chan = s[da + 2 + k:]
        assert 0.1 < np.sqrt(np.mean(chan ** 2)) < 3.0

    def test_power_floor(self):
        env = BackscatterEnv(desk_config(), seed=3)
        env.reset()
        out = env.step(np.concatenate([np.zeros(8), np.zeros(2)]))
        # zero beam: transmit power slot floors at 1e-12 W = -90 dBm
        assert out.state[env.action_dim + 1] == pytest.approx(-3.0)


class TestRewardTerms:
    def test_matches_manual_recomputation(self):
        from bibc.link import BeamState, incident_powers, mmse_combiners, sum_rate
        config = desk_config()
        env = BackscatterEnv(config, seed=5)
        env.reset()
        raw = np.linspace(-0.8, 0.8, env.action_dim)
        w, alpha = env.apply_action(raw)
        reward, rate, omega_pow, omega_eh = env.reward_terms(w, alpha)
        channels = env.channels
        u = mmse_combiners(channels, w, alpha, config)
        want_rate = sum_rate(channels, BeamState(w=w, u=u, alpha=alpha), config)
        assert rate == pytest.approx(want_rate, rel=1e-12)
        p_th = eh_threshold(config.eh)
        p_in = incident_powers(channels, w)
        want_eh = float(np.sum(np.maximum(
            p_th - (1 - alpha) * p_in, 0.0)) / p_th)
        assert omega_eh == pytest.approx(want_eh, rel=1e-12)
        assert omega_pow == 0.0
        assert reward == pytest.approx(want_rate - want_eh, rel=1e-10)

    def test_power_penalty_indicator(self):
        env = BackscatterEnv(desk_config(), seed=5, w_bound_scale=2.0)
        env.reset()
        out = env.step(np.ones(env.action_dim))
        assert out.omega_pow == 1.0
        env2 = BackscatterEnv(desk_config(), seed=5)
        env2.reset()
        out2 = env2.step(np.ones(env2.action_dim))
        assert out2.omega_pow == 0.0

    def test_eh_penalty_counts_shortfall_per_tag(self):
        env = BackscatterEnv(desk_config(), seed=5)
        env.reset()
        out = env.step(np.zeros(env.action_dim))
        # raw zeros map to w = 0: both tags fully short of the threshold
        assert out.omega_eh == pytest.approx(2.0)
        assert out.sum_rate == pytest.approx(0.0, abs=1e-12)
        assert out.reward == pytest.approx(-2.0, abs=1e-9)


class TestEpisodeLifecycle:
    def test_step_before_reset_raises(self):
        env = BackscatterEnv(desk_config(), seed=1)
        with pytest.raises(StateError):
            env.step(np.zeros(env.action_dim))

    def test_episode_exhaustion(self):
        env = BackscatterEnv(desk_config(), seed=1, steps_per_episode=2)
        env.reset()
        env.step(np.zeros(env.action_dim))
        env.step(np.zeros(env.action_dim))
        with pytest.raises(StateError):
            env.step(np.zeros(env.action_dim))
        env.reset()
        env.step(np.zeros(env.action_dim))

    def test_channels_fixed_within_episode(self):
        env = BackscatterEnv(desk_config(), seed=1)
        env.reset()
        raw = np.linspace(-0.5, 0.5, env.action_dim)
        r1 = env.step(raw).reward
        r2 = env.step(raw).reward
        assert r1 == r2

    def test_channels_redrawn_across_episodes(self):
        env = BackscatterEnv(desk_config(), seed=1)
        env.reset(0)
        f0_a = env.channels.f0.copy()
        env.reset(1)
        assert np.max(np.abs(env.channels.f0 - f0_a)) > 1e-9

    def test_reset_advances_episodes(self):
        env = BackscatterEnv(desk_config(), seed=1)
        env.reset()
        assert env.episode == 0
        env.reset()
        assert env.episode == 1
        env.reset(5)
        assert env.episode == 5

    def test_step_physical_matches_step(self):
        a = BackscatterEnv(desk_config(), seed=2)
        b = BackscatterEnv(desk_config(), seed=2)
        a.reset(0)
        b.reset(0)
        raw = np.linspace(-0.7, 0.7, a.action_dim)
        out_a = a.step(raw)
        w, alpha = b.apply_action(raw)
        out_b = b.step_physical(w, alpha)
        assert out_a.reward == out_b.reward
        np.testing.assert_allclose(out_a.state, out_b.state, atol=1e-15)

    def test_determinism(self):
        outs = []
        for _ in range(2):
            env = BackscatterEnv(desk_config(), seed=11)
            rows = []
            for e in range(2):
                s = env.reset(e)
                rows.append(s.copy())
                for t in range(3):
                    out = env.step(np.full(env.action_dim, 0.1 * t - 0.1))
                    rows.append(out.state.copy())
                    rows.append(np.array([out.reward, out.sum_rate]))
            outs.append(np.concatenate([r.ravel() for r in rows]))
        np.testing.assert_array_equal(outs[0], outs[1])


class TestValidation:
    def test_bad_constructor_args(self):
        with pytest.raises(ParameterError):
            BackscatterEnv(desk_config(), seed=0, steps_per_episode=0)
        with pytest.raises(ParameterError):
            BackscatterEnv(desk_config(), seed=0, alpha_margin=0.7)
        with pytest.raises(ParameterError):
            BackscatterEnv(desk_config(), seed=0, w_bound_scale=0.0)

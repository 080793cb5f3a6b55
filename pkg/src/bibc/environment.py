"""Episodic decision environment around the link simulator.

An agent picks the transmit beam and the tags' reflection coefficients; the
reader always applies the SINR-optimal combiners. Observations stack the last
action, its reward, transmit and incident powers, and the normalized channel
realization. Channels stay fixed within an episode and are redrawn per episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ActionError, ParameterError, StateError
from .link import (ALPHA_MARGIN, BeamState, eh_threshold, incident_powers,
                   mmse_combiners, sum_rate)
from .scenario import Scenario


def action_dim(config):
    """Real action length: 2M beam components plus K reflection coefficients."""
    return 2 * config.m + config.k


def state_dim(config):
    """Observation length: action, reward, transmit power, K incident powers,
    and the real and imaginary parts of every channel block."""
    m, n, k = config.m, config.n, config.k
    channel = 2 * (m * n + k * m * n + k * m + k * n)
    return action_dim(config) + 1 + 1 + k + channel


@dataclass(frozen=True)
class StepOutcome:
    """Result of one environment step."""

    state: np.ndarray
    reward: float
    sum_rate: float
    omega_pow: float
    omega_eh: float


class BackscatterEnv:
    """Seeded environment; identical (config, seed) gives identical rollouts."""

    def __init__(self, config, seed, steps_per_episode=10, w_bound_scale=1.0,
                 alpha_margin=ALPHA_MARGIN, power_floor_watts=1e-12):
        if steps_per_episode < 1:
            raise ParameterError(
                f"steps_per_episode must be positive, got {steps_per_episode}")
        if not 0 < alpha_margin < 0.5:
            raise ParameterError(
                f"alpha_margin must lie in (0, 0.5), got {alpha_margin}")
        if w_bound_scale <= 0:
            raise ParameterError(
                f"w_bound_scale must be positive, got {w_bound_scale}")
        self.config = config
        self.scenario = Scenario(config, seed)
        self.steps_per_episode = steps_per_episode
        self.alpha_margin = alpha_margin
        self.power_floor_watts = power_floor_watts
        # per-component bound: raw at the corners of [-1, 1]^2M lands exactly
        # on the power budget (box inscribed in the power ball)
        self.w_scale = w_bound_scale * math.sqrt(config.ps_watts / (2 * config.m))
        self.state_dim = state_dim(config)
        self.action_dim = action_dim(config)
        self._episode = -1
        self._step = None
        self._channels = None
        self._norm = None

    # ------------------------------------------------------------------ maps

    def apply_action(self, raw):
        """Map raw action in [-1, 1]^(2M+K) to a physical beam and reflections."""
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (self.action_dim,):
            raise ActionError(
                f"action must have shape ({self.action_dim},), got {raw.shape}")
        if not np.all(np.isfinite(raw)):
            raise ActionError("action has non-finite entries")
        raw = np.clip(raw, -1.0, 1.0)
        m = self.config.m
        w = (raw[:m] + 1j * raw[m:2 * m]) * self.w_scale
        lo, hi = self.alpha_margin, 1.0 - self.alpha_margin
        alpha = lo + (raw[2 * m:] + 1.0) * 0.5 * (hi - lo)
        return w, alpha

    def raw_from_physical(self, w, alpha):
        """Inverse of apply_action; entries may leave [-1, 1] when the
        physical beam exceeds the inscribed box (codebook beams do)."""
        w = np.asarray(w, dtype=complex)
        alpha = np.asarray(alpha, dtype=float)
        lo, hi = self.alpha_margin, 1.0 - self.alpha_margin
        raw_alpha = (alpha - lo) / (hi - lo) * 2.0 - 1.0
        return np.concatenate([w.real / self.w_scale, w.imag / self.w_scale,
                               raw_alpha])

    # --------------------------------------------------------------- scoring

    def reward_terms(self, w, alpha):
        """(reward, sum_rate, omega_pow, omega_eh) for the current channels.

        The power penalty is the indicator of a budget violation; the
        harvesting penalty sums the per-tag shortfalls relative to the
        activation threshold.
        """
        if self._channels is None:
            raise StateError("reset the environment before scoring actions")
        cfg = self.config
        u = mmse_combiners(self._channels, w, alpha, cfg)
        rate = sum_rate(self._channels, BeamState(w=w, u=u, alpha=alpha), cfg)
        power = float(np.sum(np.abs(w) ** 2))
        omega_pow = 1.0 if power > cfg.ps_watts * (1.0 + 1e-12) else 0.0
        p_th = eh_threshold(cfg.eh)
        p_in = incident_powers(self._channels, w)
        shortfall = np.maximum(p_th - (1.0 - alpha) * p_in, 0.0)
        omega_eh = float(np.sum(shortfall) / p_th)
        reward = rate - omega_pow - omega_eh
        return reward, rate, omega_pow, omega_eh

    # ------------------------------------------------------------- lifecycle

    def reset(self, episode=None):
        """Start an episode: redraw channels, place the default action
        (uniform beam at half power, mid reflections), return its state."""
        if episode is None:
            episode = self._episode + 1
        if episode < 0:
            raise ParameterError(f"episode index must be nonnegative, got {episode}")
        self._episode = episode
        self._step = 0
        self._channels = self.scenario.channels(episode)
        b0, bf, bb = self.scenario.large_scale()
        self._norm = (b0, bf, bb)
        raw = np.zeros(self.action_dim)
        raw[:2 * self.config.m] = 1.0 / math.sqrt(2.0)
        w, alpha = self.apply_action(raw)
        return self._assemble_state(raw, w, alpha, reward=0.0)

    @property
    def episode(self):
        return self._episode

    @property
    def channels(self):
        if self._channels is None:
            raise StateError("reset the environment before reading channels")
        return self._channels

    def step(self, raw):
        """Play one raw action; returns the outcome with the successor state."""
        raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
        w, alpha = self.apply_action(raw)
        return self._advance(raw, w, alpha)

    def step_physical(self, w, alpha):
        """Play a physical action directly (codebook beams bypass the box map);
        the state's action block stores the raw equivalent."""
        w = np.asarray(w, dtype=complex)
        alpha = np.asarray(alpha, dtype=float)
        if w.shape != (self.config.m,):
            raise ActionError(
                f"beam must have shape ({self.config.m},), got {w.shape}")
        if alpha.shape != (self.config.k,):
            raise ActionError(
                f"reflections must have shape ({self.config.k},), got {alpha.shape}")
        raw = self.raw_from_physical(w, alpha)
        return self._advance(raw, w, alpha)

    def _advance(self, raw, w, alpha):
        if self._step is None:
            raise StateError("reset the environment before stepping")
        if self._step >= self.steps_per_episode:
            raise StateError(
                f"episode exhausted after {self.steps_per_episode} steps; reset")
        reward, rate, omega_pow, omega_eh = self.reward_terms(w, alpha)
        self._step += 1
        state = self._assemble_state(raw, w, alpha, reward)
        return StepOutcome(state=state, reward=reward, sum_rate=rate,
                           omega_pow=omega_pow, omega_eh=omega_eh)

    # ----------------------------------------------------------------- state

    def _power_norm(self, p_watts):
        p = max(float(p_watts), self.power_floor_watts)
        return 10.0 * math.log10(p * 1000.0) / 30.0

    def _assemble_state(self, raw, w, alpha, reward):
        ch = self._channels
        b0, bf, bb = self._norm
        k = self.config.k
        p_t = self._power_norm(np.sum(np.abs(w) ** 2))
        p_in = incident_powers(ch, w)
        blocks = [ch.f0 / math.sqrt(b0)]
        blocks += [ch.f[i] / math.sqrt(bf[i] * bb[i]) for i in range(k)]
        blocks += [ch.g_f[i] / math.sqrt(bf[i]) for i in range(k)]
        blocks += [ch.g_b[i] / math.sqrt(bb[i]) for i in range(k)]
        flat = np.concatenate([b.ravel() for b in blocks])
        parts = [np.asarray(raw, dtype=float), [reward], [p_t],
                 [self._power_norm(p) for p in p_in], flat.real, flat.imag]
        state = np.concatenate([np.atleast_1d(np.asarray(p, dtype=float))
                                for p in parts])
        if state.shape != (self.state_dim,):
            raise StateError(
                f"assembled state has shape {state.shape}, expected ({self.state_dim},)")
        return state

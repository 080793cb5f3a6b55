"""Value learners over a discretized joint action space.

The action table crosses a beamsteering codebook with a transmit-power grid
and per-tag reflection levels. Variants: plain Q-learning targets, decoupled
selection/evaluation (double), and a value/advantage split (dueling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..neural import (Adam, Head, Mlp, NetPair, hidden_for, load_params,
                      save_params)
from .common import ReplayBuffer

VARIANTS = ("dqn", "ddqn", "duel")


def build_codebook(m, l_ce):
    """Half-wavelength beamsteering codebook: rows w_l with entries
    exp(j*pi*i*cos(theta_l))/sqrt(M), cos(theta_l) uniform on [-1, 1]."""
    if l_ce < 1:
        raise ParameterError(f"codebook size must be positive, got {l_ce}")
    cos = np.linspace(-1.0, 1.0, l_ce)
    phase = np.pi * np.outer(cos, np.arange(m))
    return np.exp(1j * phase) / math.sqrt(m)


@dataclass(frozen=True)
class DiscreteActionTable:
    """Joint lexicographic enumeration of (codeword, power, alpha_1..alpha_K)."""

    codebook: np.ndarray
    powers: np.ndarray
    alphas: np.ndarray
    k: int

    @property
    def n_actions(self):
        return len(self.codebook) * len(self.powers) * len(self.alphas) ** self.k

    @property
    def shape(self):
        return (len(self.codebook), len(self.powers)) + (len(self.alphas),) * self.k

    def decode(self, index):
        """Physical action for a joint index: (sqrt(P) * codeword, alphas)."""
        if not 0 <= index < self.n_actions:
            raise ParameterError(
                f"action index {index} outside [0, {self.n_actions})")
        parts = np.unravel_index(int(index), self.shape)
        w = math.sqrt(self.powers[parts[1]]) * self.codebook[parts[0]]
        alpha = self.alphas[np.asarray(parts[2:])]
        return w, alpha


def build_action_table(m, k, ps_watts, hyper):
    """Table from the hyperparameters: l_ce beams, l_p power levels on
    [power_floor_frac * P, P], l_eh reflection levels per tag."""
    powers = np.linspace(hyper.power_floor_frac * ps_watts, ps_watts, hyper.l_p)
    edge = 1.0 / (hyper.l_eh - 1)
    alphas = np.linspace(edge, 1.0 - edge, hyper.l_eh)
    return DiscreteActionTable(codebook=build_codebook(m, hyper.l_ce),
                               powers=powers, alphas=alphas, k=k)


class DqnAgent:
    kind = "discrete"

    def __init__(self, state_dim, table, hyper, rng, variant="dqn"):
        if variant not in VARIANTS:
            raise ParameterError(f"variant must be one of {VARIANTS}, got {variant!r}")
        self.state_dim = state_dim
        self.table = table
        self.hyper = hyper
        self.variant = variant
        n = table.n_actions
        heads = ([Head(1, "linear"), Head(n, "linear")] if variant == "duel"
                 else [Head(n, "linear")])
        self.net = NetPair(Mlp(state_dim, hidden_for(state_dim), heads, "relu",
                               rng.derive("net-init", 0)))
        self.opt = Adam(self.net.online.params, hyper.critic_lr,
                        decay=hyper.lr_decay, decay_mode=hyper.decay_mode)
        self._rng_explore = rng.derive("exploration")
        self._rng_replay = rng.derive("replay")
        self.buffer = ReplayBuffer(hyper.buffer_capacity, state_dim, (),
                                   action_dtype=np.int64)
        self.eps = hyper.eps0
        self._steps = 0

    # ------------------------------------------------------------ interaction

    def begin_episode(self, episode):
        """Per-episode schedule eps_e = max(eps_min, eps0 * decay^e)."""
        self.eps = max(self.hyper.eps_min,
                       self.hyper.eps0 * self.hyper.eps_decay ** episode)

    def q_values(self, net, states, remember=False):
        """Batched Q(s, .); the dueling variant recombines value and
        mean-centered advantages."""
        outs = net.forward(states, remember=remember)
        if self.variant != "duel":
            return outs[0]
        v, adv = outs
        return v + adv - adv.mean(axis=-1, keepdims=True)

    def act(self, state, explore=True):
        if explore and self._rng_explore.uniform() < self.eps:
            return int(self._rng_explore.integers(0, self.table.n_actions))
        return int(np.argmax(self.q_values(self.net.online, state)))

    def observe(self, s, a, r, s2):
        self.buffer.push(s, a, r, s2)
        self._steps += 1
        batch = self.buffer.sample(self._rng_replay, self.hyper.batch_size)
        loss = None if batch is None else self.update(*batch)
        if self._steps % self.hyper.target_sync == 0:
            self.net.hard_sync()
        if self.hyper.debug:
            for p in self.net.online.params:
                if not np.all(np.isfinite(p)):
                    raise ParameterError("non-finite parameter after update")
        return loss

    # --------------------------------------------------------------- updates

    def compute_target(self, r, s2):
        if self.variant == "ddqn":
            # pick a' with the online net, evaluate it with the target net
            sel = np.argmax(self.q_values(self.net.online, s2), axis=1)
            qt = self.q_values(self.net.target, s2)
            future = qt[np.arange(len(sel)), sel]
        else:
            future = np.max(self.q_values(self.net.target, s2), axis=1)
        return r + self.hyper.gamma * future

    def update(self, s, a, r, s2):
        y = self.compute_target(r, s2)
        q = self.q_values(self.net.online, s, remember=True)
        batch = s.shape[0]
        rows = np.arange(batch)
        picked = q[rows, a]
        loss = float(np.mean((picked - y) ** 2))
        gq = np.zeros_like(q)
        gq[rows, a] = 2.0 * (picked - y) / batch
        if self.variant == "duel":
            gv = gq.sum(axis=1, keepdims=True)
            gadv = gq - gq.mean(axis=1, keepdims=True)
            grads = self.net.online.backward([gv, gadv])
        else:
            grads = self.net.online.backward([gq])
        self.opt.step(grads.params)
        return loss

    # ------------------------------------------------------------ checkpoint

    def save(self, path):
        save_params(path, self.net.online.params + self.net.target.params)

    def load(self, path):
        arrays = load_params(path)
        n = len(self.net.online.params)
        if len(arrays) != 2 * n:
            raise ParameterError(
                f"checkpoint holds {len(arrays)} arrays, expected {2 * n}")
        self.net.online.set_params(arrays[:n])
        self.net.target.set_params(arrays[n:])
